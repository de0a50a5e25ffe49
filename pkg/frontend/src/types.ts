// Wire types mirroring the planning service's JSON responses. The UI never
// derives planning data itself; everything rendered comes from these fields.

export interface SubRequest {
  pos: string;
  neg: string;
  mustsee: boolean;
  type: string;
}

export interface ItineraryOut {
  poi_ids: number[];
  narrative: string;
  est_duration_hours: number;
  request: string;
}

export interface PoiSummary {
  poi_id: number;
  name: string;
  category: string;
  rating: number;
  longitude: number;
  latitude: number;
  order: number;
}

export interface PointFeature {
  type: "Feature";
  geometry: { type: "Point"; coordinates: [number, number] };
  properties: {
    poi_id: number;
    name: string;
    category: string;
    rating: number;
    order: number;
  };
}

export interface LineFeature {
  type: "Feature";
  geometry: { type: "LineString"; coordinates: [number, number][] };
  properties: { role: string };
}

export interface RouteGeoJSON {
  type: "FeatureCollection";
  features: (PointFeature | LineFeature)[];
}

export interface PlanResponse {
  itinerary: ItineraryOut;
  ordered_pois: PoiSummary[];
  subrequests: SubRequest[];
  route_geojson: RouteGeoJSON;
  diagnostics: {
    warnings: string[];
    [key: string]: unknown;
  };
}

export interface PoiListResponse {
  total: number;
  page: number;
  page_size: number;
  pois: AmbientPoi[];
}

export interface AmbientPoi {
  poi_id: number;
  name: string;
  city: string;
  category: string;
  rating: number;
  longitude: number;
  latitude: number;
  description: string;
}

export interface IngestResponse {
  stored_ids: number[];
  skipped: string[];
  warnings: string[];
}

export interface ServiceError {
  code: string;
  stage: string;
  message: string;
}
