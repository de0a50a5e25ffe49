// Client view state: plan history, category filters, ambient POIs. The
// history keeps up to 20 plans per session so refinements can be compared
// side by side and re-activated without refetching.

import type { AmbientPoi, PlanResponse } from "./types";

export const HISTORY_LIMIT = 20;

export interface HistoryEntry {
  id: number;
  request: string;
  style: string;
  plan: PlanResponse;
}

export class ViewState {
  city: string;
  history: HistoryEntry[] = [];
  activeId: number | null = null;
  ambientPois: AmbientPoi[] = [];
  activeFilters: Set<string> = new Set();
  highlightedIds: Set<number> = new Set();
  private nextId = 1;

  constructor(city = "") {
    this.city = city;
  }

  addPlan(request: string, style: string, plan: PlanResponse): HistoryEntry {
    const entry: HistoryEntry = { id: this.nextId++, request, style, plan };
    this.history.push(entry);
    if (this.history.length > HISTORY_LIMIT) {
      this.history.shift();
    }
    this.activeId = entry.id;
    return entry;
  }

  setActive(id: number): HistoryEntry | null {
    const entry = this.history.find((e) => e.id === id) ?? null;
    if (entry) {
      this.activeId = entry.id;
    }
    return entry;
  }

  get activePlan(): PlanResponse | null {
    return this.history.find((e) => e.id === this.activeId)?.plan ?? null;
  }

  get lastRequest(): string {
    const entry = this.history[this.history.length - 1];
    return entry ? entry.request : "";
  }

  composeRefinement(edit: string): string {
    const base = this.lastRequest;
    return base ? `${base}. Also: ${edit}` : edit;
  }

  toggleFilter(category: string): void {
    if (this.activeFilters.has(category)) {
      this.activeFilters.delete(category);
    } else {
      this.activeFilters.add(category);
    }
  }

  /** Ambient POIs passing the category filters. POIs on the active
   * itinerary are always visible, filters notwithstanding. */
  visiblePois(): AmbientPoi[] {
    const pinned = new Set(this.activePlan?.itinerary.poi_ids ?? []);
    return this.ambientPois.filter(
      (p) =>
        pinned.has(p.poi_id) ||
        this.activeFilters.size === 0 ||
        this.activeFilters.has(p.category),
    );
  }
}
