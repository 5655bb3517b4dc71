import { initApp } from "./app.js";

document.addEventListener("DOMContentLoaded", () => {
  void initApp(document, "");
});
