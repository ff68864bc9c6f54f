// Browser bootstrap: ?service=<url>&dataset=<id>&seed=<n>

import { SessionClient } from "./api.js";
import { LabelingApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const service = params.get("service") ?? "http://127.0.0.1:8180";
const dataset = params.get("dataset") ?? "demo";
const seed = params.has("seed") ? Number(params.get("seed")) : undefined;

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = new LabelingApp({
  client: new SessionClient(service),
  root,
  datasetId: dataset,
  seed,
});
void app.start();
