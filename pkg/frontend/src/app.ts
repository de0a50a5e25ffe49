// DOM wiring: request box, refinement box, history list, ingest panel,
// category filters, narrative panel, toasts. All planning data flows from
// PlanResponse objects; this module only routes it to the map and panels.

import { PlannerApi, PlanServiceError } from "./api";
import type { MapAdapter } from "./render";
import { renderPlan, subrequestChips } from "./render";
import { ViewState } from "./state";
import type { PlanResponse } from "./types";

export interface AppElements {
  requestBox: HTMLTextAreaElement;
  styleBox: HTMLInputElement;
  submitButton: HTMLButtonElement;
  refineBox: HTMLInputElement;
  refineButton: HTMLButtonElement;
  historyList: HTMLElement;
  chipBar: HTMLElement;
  narrativePanel: HTMLElement;
  toastArea: HTMLElement;
  ingestBox: HTMLTextAreaElement;
  ingestButton: HTMLButtonElement;
  ingestNotice: HTMLElement;
  filterBar: HTMLElement;
}

export class App {
  constructor(
    private readonly elements: AppElements,
    private readonly api: PlannerApi,
    private readonly map: MapAdapter,
    readonly state: ViewState,
  ) {
    this.wire();
    this.syncButtons();
  }

  private wire(): void {
    const e = this.elements;
    e.requestBox.addEventListener("input", () => this.syncButtons());
    e.refineBox.addEventListener("input", () => this.syncButtons());
    e.ingestBox.addEventListener("input", () => this.syncButtons());
    e.submitButton.addEventListener("click", () => {
      void this.submitRequest(e.requestBox.value.trim(), e.styleBox.value.trim());
    });
    e.refineButton.addEventListener("click", () => {
      void this.refine(e.refineBox.value.trim());
    });
    e.ingestButton.addEventListener("click", () => {
      void this.ingest(e.ingestBox.value.trim());
    });
  }

  syncButtons(): void {
    const e = this.elements;
    e.submitButton.disabled = e.requestBox.value.trim() === "";
    e.refineButton.disabled =
      e.refineBox.value.trim() === "" || this.state.history.length === 0;
    e.ingestButton.disabled = e.ingestBox.value.trim() === "";
  }

  async submitRequest(request: string, style = ""): Promise<void> {
    if (!request) {
      return;
    }
    try {
      const plan = await this.api.plan(request, this.state.city, style);
      this.state.addPlan(request, style, plan);
      this.showPlan(plan);
      this.renderHistory();
      this.syncButtons();
    } catch (err) {
      if ((err as Error).name === "AbortError") {
        return; // replaced by a newer submission
      }
      this.toastError(err);
    }
  }

  async refine(edit: string): Promise<void> {
    if (!edit || this.state.history.length === 0) {
      return;
    }
    await this.submitRequest(this.state.composeRefinement(edit), "");
  }

  /** Re-activate a plan from history; swaps layers without refetching. */
  activateHistoryEntry(id: number): void {
    const entry = this.state.setActive(id);
    if (entry) {
      this.showPlan(entry.plan);
      this.renderHistory();
    }
  }

  async ingest(postText: string): Promise<void> {
    if (!postText) {
      return;
    }
    try {
      const report = await this.api.ingest(postText, this.state.city);
      this.state.highlightedIds = new Set(report.stored_ids);
      if (report.skipped.length > 0) {
        this.elements.ingestNotice.textContent = `could not locate: ${report.skipped.join(", ")}`;
      } else {
        this.elements.ingestNotice.textContent = "";
      }
      await this.refreshAmbientPois();
    } catch (err) {
      this.toastError(err);
    }
  }

  async refreshAmbientPois(): Promise<void> {
    const listing = await this.api.pois(this.state.city);
    this.state.ambientPois = listing.pois;
    this.renderAmbientLayer();
    this.renderFilterBar();
  }

  toggleFilter(category: string): void {
    this.state.toggleFilter(category);
    this.renderAmbientLayer();
    this.renderFilterBar();
  }

  private showPlan(plan: PlanResponse): void {
    renderPlan(this.map, plan);
    this.renderChips(plan);
    this.elements.narrativePanel.textContent = plan.itinerary.narrative;
    this.renderAmbientLayer();
  }

  private renderChips(plan: PlanResponse): void {
    const bar = this.elements.chipBar;
    bar.replaceChildren();
    for (const chip of subrequestChips(plan.subrequests)) {
      const el = document.createElement("span");
      el.className = `chip chip-${chip.kind}`;
      el.textContent = chip.kind === "mustsee" ? `📌 ${chip.text}` : chip.text;
      bar.appendChild(el);
    }
  }

  renderHistory(): void {
    const list = this.elements.historyList;
    list.replaceChildren();
    for (const entry of this.state.history) {
      const item = document.createElement("li");
      const button = document.createElement("button");
      button.type = "button";
      button.dataset.entryId = String(entry.id);
      button.textContent = entry.request;
      if (entry.id === this.state.activeId) {
        button.classList.add("active");
      }
      button.addEventListener("click", () => this.activateHistoryEntry(entry.id));
      item.appendChild(button);
      list.appendChild(item);
    }
  }

  private renderAmbientLayer(): void {
    this.map.clearAmbientLayer();
    const onRoute = new Set(this.state.activePlan?.itinerary.poi_ids ?? []);
    for (const poi of this.state.visiblePois()) {
      if (onRoute.has(poi.poi_id)) {
        continue; // already shown as a numbered stop
      }
      this.map.addAmbientPoi({
        poiId: poi.poi_id,
        lngLat: [poi.longitude, poi.latitude],
        name: poi.name,
        category: poi.category,
        highlighted: this.state.highlightedIds.has(poi.poi_id),
      });
    }
  }

  private renderFilterBar(): void {
    const bar = this.elements.filterBar;
    bar.replaceChildren();
    const categories = [...new Set(this.state.ambientPois.map((p) => p.category))].sort();
    for (const category of categories) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked =
        this.state.activeFilters.size === 0 || this.state.activeFilters.has(category);
      box.addEventListener("change", () => this.toggleFilter(category));
      label.appendChild(box);
      label.appendChild(document.createTextNode(category));
      bar.appendChild(label);
    }
  }

  private toastError(err: unknown): void {
    const text =
      err instanceof PlanServiceError
        ? `${err.stage}: ${err.message}`
        : `error: ${(err as Error).message ?? err}`;
    const toast = document.createElement("div");
    toast.className = "toast";
    toast.textContent = text;
    this.elements.toastArea.appendChild(toast);
    setTimeout(() => toast.remove(), 6000);
  }
}
