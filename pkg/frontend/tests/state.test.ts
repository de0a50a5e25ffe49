import { describe, expect, it } from "vitest";

import { HISTORY_LIMIT, ViewState } from "../src/state";
import type { AmbientPoi, PlanResponse } from "../src/types";
import planFixture from "./fixtures/plan_response.json";
import poisFixture from "./fixtures/pois_listing.json";

const plan = planFixture as unknown as PlanResponse;
const ambient = poisFixture.pois as AmbientPoi[];

describe("history", () => {
  it("caps at twenty entries, dropping the oldest", () => {
    const state = new ViewState("Rivertown");
    for (let i = 0; i < HISTORY_LIMIT + 5; i++) {
      state.addPlan(`request ${i}`, "", plan);
    }
    expect(state.history.length).toBe(HISTORY_LIMIT);
    expect(state.history[0].request).toBe("request 5");
  });

  it("activates the newest plan and can switch back", () => {
    const state = new ViewState("Rivertown");
    const first = state.addPlan("first", "", plan);
    const second = state.addPlan("second", "", plan);
    expect(state.activeId).toBe(second.id);
    state.setActive(first.id);
    expect(state.activePlan).toBe(first.plan);
  });

  it("ignores unknown history ids", () => {
    const state = new ViewState("Rivertown");
    const entry = state.addPlan("only", "", plan);
    expect(state.setActive(999)).toBeNull();
    expect(state.activeId).toBe(entry.id);
  });
});

describe("refinement composition", () => {
  it("appends the edit to the previous request", () => {
    const state = new ViewState("Rivertown");
    state.addPlan("an artsy day", "", plan);
    expect(state.composeRefinement("more art, fewer restaurants")).toBe(
      "an artsy day. Also: more art, fewer restaurants",
    );
  });

  it("uses the edit alone when there is no history", () => {
    const state = new ViewState("Rivertown");
    expect(state.composeRefinement("just tea")).toBe("just tea");
  });
});

describe("category filters", () => {
  it("filters ambient POIs by active categories", () => {
    const state = new ViewState("Rivertown");
    state.ambientPois = ambient;
    state.toggleFilter("nature");
    const visible = state.visiblePois();
    expect(visible.length).toBeGreaterThan(0);
    expect(visible.every((p) => p.category === "nature")).toBe(true);
  });

  it("always keeps the active itinerary's POIs visible", () => {
    const state = new ViewState("Rivertown");
    state.ambientPois = ambient;
    state.addPlan("r", "", plan);
    const routeCategories = new Set(
      ambient
        .filter((p) => plan.itinerary.poi_ids.includes(p.poi_id))
        .map((p) => p.category),
    );
    const absentCategory = ["shop", "nature", "site"].find(
      (c) => !routeCategories.has(c),
    );
    state.toggleFilter(absentCategory ?? "shop");
    const visibleIds = new Set(state.visiblePois().map((p) => p.poi_id));
    for (const poiId of plan.itinerary.poi_ids) {
      expect(visibleIds.has(poiId)).toBe(true);
    }
  });

  it("toggling twice restores the unfiltered view", () => {
    const state = new ViewState("Rivertown");
    state.ambientPois = ambient;
    state.toggleFilter("shop");
    state.toggleFilter("shop");
    expect(state.visiblePois().length).toBe(ambient.length);
  });
});
