import { boot } from "./app.js";

// browser entry: ?api=http://host:port overrides the service location
const baseUrl =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8756";
boot(document, { baseUrl });
