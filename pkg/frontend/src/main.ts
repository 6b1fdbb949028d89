/**
 * Entry point. The service base URL defaults to the page origin; a
 * different backend can be pointed at with ?api=http://host:port (the
 * usual setup when the page is served statically next to a service
 * started via `glancelab serve`).
 */

import { ApiClient } from "./api.js";
import { App } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? window.location.origin;

const root = document.getElementById("app");
if (root === null) throw new Error("missing #app mount point");

void new App(root, new ApiClient(base)).start();
