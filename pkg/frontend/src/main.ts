import "leaflet/dist/leaflet.css";
import "./style.css";

import { PlannerApi } from "./api";
import { App } from "./app";
import type { AppElements } from "./app";
import { LeafletMap } from "./map_leaflet";
import { ViewState } from "./state";

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const params = new URLSearchParams(window.location.search);
const city = params.get("city") ?? "Rivertown";

const elements: AppElements = {
  requestBox: el("request-box"),
  styleBox: el("style-box"),
  submitButton: el("submit-button"),
  refineBox: el("refine-box"),
  refineButton: el("refine-button"),
  historyList: el("history-list"),
  chipBar: el("chip-bar"),
  narrativePanel: el("narrative-panel"),
  toastArea: el("toast-area"),
  ingestBox: el("ingest-box"),
  ingestButton: el("ingest-button"),
  ingestNotice: el("ingest-notice"),
  filterBar: el("filter-bar"),
};

const app = new App(
  elements,
  new PlannerApi(),
  new LeafletMap(el("map")),
  new ViewState(city),
);

void app.refreshAmbientPois().catch((err) => {
  console.warn("could not load POIs:", err);
});
