/**
 * Browser entry point: wires the real fetch into the API client and
 * mounts the app. The user id is kept in localStorage so a reload keeps
 * the same learner profile.
 */

import { ApiClient } from "./api.js";
import { startApp } from "./app.js";

const USER_KEY = "linguafeed.user";

function currentUser(): string {
  let user = window.localStorage.getItem(USER_KEY);
  if (!user) {
    user = `u-${Math.random().toString(36).slice(2, 10)}`;
    window.localStorage.setItem(USER_KEY, user);
  }
  return user;
}

const root = document.getElementById("app");
if (root) {
  startApp(root, new ApiClient(window.fetch.bind(window)), currentUser());
}
