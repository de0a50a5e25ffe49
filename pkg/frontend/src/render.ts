// Pure projections from a PlanResponse onto map/panel instructions. Every
// number, coordinate, and chip the UI shows originates here, straight from
// response fields; nothing is recomputed client-side.

import type { LineFeature, PlanResponse, PointFeature, SubRequest } from "./types";

export interface MarkerSpec {
  poiId: number;
  label: number; // 1-based visit order shown on the marker
  lngLat: [number, number];
  name: string;
  category: string;
}

export interface ChipSpec {
  text: string;
  kind: "pos" | "neg" | "mustsee";
}

export interface AmbientSpec {
  poiId: number;
  lngLat: [number, number];
  name: string;
  category: string;
  highlighted: boolean;
}

export interface MapAdapter {
  clearPlanLayers(): void;
  addNumberedMarker(spec: MarkerSpec): void;
  drawRoute(coordinates: [number, number][]): void;
  clearAmbientLayer(): void;
  addAmbientPoi(spec: AmbientSpec): void;
  fitRoute(coordinates: [number, number][]): void;
}

function pointFeatures(plan: PlanResponse): PointFeature[] {
  return plan.route_geojson.features.filter(
    (f): f is PointFeature => f.geometry.type === "Point",
  );
}

export function planMarkers(plan: PlanResponse): MarkerSpec[] {
  return pointFeatures(plan)
    .slice()
    .sort((a, b) => a.properties.order - b.properties.order)
    .map((f) => ({
      poiId: f.properties.poi_id,
      label: f.properties.order + 1,
      lngLat: f.geometry.coordinates,
      name: f.properties.name,
      category: f.properties.category,
    }));
}

export function routeCoordinates(plan: PlanResponse): [number, number][] {
  const line = plan.route_geojson.features.find(
    (f): f is LineFeature => f.geometry.type === "LineString",
  );
  return line ? line.geometry.coordinates : [];
}

export function subrequestChips(subrequests: SubRequest[]): ChipSpec[] {
  const chips: ChipSpec[] = [];
  for (const sub of subrequests) {
    if (sub.mustsee && sub.pos) {
      chips.push({ text: sub.pos, kind: "mustsee" });
    } else if (sub.pos) {
      chips.push({ text: sub.pos, kind: "pos" });
    }
    if (sub.neg) {
      chips.push({ text: sub.neg, kind: "neg" });
    }
  }
  return chips;
}

export function renderPlan(map: MapAdapter, plan: PlanResponse): void {
  map.clearPlanLayers();
  for (const marker of planMarkers(plan)) {
    map.addNumberedMarker(marker);
  }
  const coords = routeCoordinates(plan);
  map.drawRoute(coords);
  map.fitRoute(coords);
}
