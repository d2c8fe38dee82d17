/** Browser entry point: mount the app on the #app element. */

import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  void new App({ root }).start();
}
