import { GateApi } from "./api.js";
import { mountConsole } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const console_ = mountConsole(root, new GateApi(""));
  void console_.init();
}
