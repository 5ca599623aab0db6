/**
 * Entry point: read ?server= and ?session= from the URL, join the
 * session (creating a small demo one when none is given), and keep
 * the page rendered from every view change.
 */

import { createSession, SessionClient } from "./client.js";
import { render } from "./ui.js";

async function start(): Promise<void> {
  const root = document.getElementById("console");
  if (root === null) throw new Error("missing #console element");
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? window.location.origin;
  let session = params.get("session");
  if (session === null) {
    const created = await createSession(server, { model: { palletize: 3 } });
    session = created.session;
    const url = new URL(window.location.href);
    url.searchParams.set("session", session);
    window.history.replaceState(null, "", url.toString());
  }
  const client = new SessionClient({ server, session });
  client.subscribe((view) => render(root, view, client));
  render(root, client.view, client);
  client.connect();
}

start().catch((err) => {
  const root = document.getElementById("console");
  if (root !== null) {
    root.textContent = `failed to start: ${err}`;
  }
  console.error(err);
});
