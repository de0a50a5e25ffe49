// Leaflet-backed MapAdapter. All geometry arrives as GeoJSON-style
// [lng, lat]; Leaflet wants [lat, lng], so the flip happens only here.

import L from "leaflet";

import type { AmbientSpec, MapAdapter, MarkerSpec } from "./render";

const CATEGORY_ICONS: Record<string, string> = {
  site: "🏛",
  restaurant: "🍜",
  entertainment: "🎭",
  shop: "🛍",
  nature: "🌿",
  other: "📍",
};

export class LeafletMap implements MapAdapter {
  private readonly map: L.Map;
  private planLayer: L.LayerGroup;
  private ambientLayer: L.LayerGroup;

  constructor(container: HTMLElement, center: [number, number] = [10.0, 50.0]) {
    this.map = L.map(container).setView([center[1], center[0]], 13);
    L.tileLayer("https://tile.openstreetmap.org/{z}/{x}/{y}.png", {
      attribution: "&copy; OpenStreetMap contributors",
    }).addTo(this.map);
    this.ambientLayer = L.layerGroup().addTo(this.map);
    this.planLayer = L.layerGroup().addTo(this.map);
  }

  clearPlanLayers(): void {
    this.planLayer.clearLayers();
  }

  addNumberedMarker(spec: MarkerSpec): void {
    const icon = L.divIcon({
      className: "stop-marker",
      html: `<span class="stop-number">${spec.label}</span>`,
      iconSize: [28, 28],
    });
    L.marker([spec.lngLat[1], spec.lngLat[0]], { icon })
      .bindPopup(`${spec.label}. ${spec.name}`)
      .addTo(this.planLayer);
  }

  drawRoute(coordinates: [number, number][]): void {
    const latLngs = coordinates.map(([lng, lat]) => [lat, lng] as [number, number]);
    L.polyline(latLngs, { weight: 4, opacity: 0.85 }).addTo(this.planLayer);
  }

  fitRoute(coordinates: [number, number][]): void {
    if (coordinates.length === 0) {
      return;
    }
    const latLngs = coordinates.map(([lng, lat]) => [lat, lng] as [number, number]);
    this.map.fitBounds(L.latLngBounds(latLngs).pad(0.2));
  }

  clearAmbientLayer(): void {
    this.ambientLayer.clearLayers();
  }

  addAmbientPoi(spec: AmbientSpec): void {
    const glyph = CATEGORY_ICONS[spec.category] ?? CATEGORY_ICONS.other;
    const icon = L.divIcon({
      className: spec.highlighted ? "poi-marker poi-new" : "poi-marker",
      html: `<span title="${spec.name}">${glyph}</span>`,
      iconSize: [22, 22],
    });
    L.marker([spec.lngLat[1], spec.lngLat[0]], { icon })
      .bindPopup(spec.name)
      .addTo(this.ambientLayer);
  }
}
