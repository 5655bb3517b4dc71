// @vitest-environment jsdom
//
// Full UI round-trip against a live annotation service: label 10 pairs,
// run one bootstrap round, rectify 2 predictions. The server's stats must
// reflect all 12 human actions and the audit log must contain exactly 12
// human-source events. Budget: 2 minutes.

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, expect, it } from "vitest";

import { initApp } from "../src/app.js";

const PY = process.env.PLACELINK_PYTHON ?? "python3";
const t0 = Date.now();

let workdir: string;
let server: ChildProcess | null = null;
let base: string;
let truth: Set<string>;

function cli(args: string[]): void {
  execFileSync(PY, ["-m", "placelink.cli", ...args], { stdio: "pipe" });
}

async function until<T>(fn: () => Promise<T | null>, what: string, timeoutMs = 30_000): Promise<T> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await fn().catch(() => null);
    if (value !== null) return value;
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
}

async function stats(): Promise<{ labeled: number; pending: number; round: number }> {
  const res = await fetch(`${base}/api/stats`);
  if (!res.ok) throw new Error(`stats ${res.status}`);
  return (await res.json()) as { labeled: number; pending: number; round: number };
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "placelink-ui-"));
  const data = join(workdir, "data");
  cli(["generate", "--out", data, "--n-restaurants", "150", "--seed", "1"]);
  cli(["block", "--restaurants", join(data, "restaurants.csv"), "--pois", join(data, "pois.csv"),
       "--out", join(workdir, "blocked.csv")]);
  cli(["featurize", "--restaurants", join(data, "restaurants.csv"), "--pois", join(data, "pois.csv"),
       "--blocked", join(workdir, "blocked.csv"), "--out", join(workdir, "pairs.csv")]);

  truth = new Set(
    readFileSync(join(data, "truth.csv"), "utf-8")
      .trim()
      .split("\n")
      .slice(1)
      .map((line) => line.trim()),
  );

  const port = 20000 + Math.floor(Math.random() * 20000);
  base = `http://127.0.0.1:${port}`;
  server = spawn(PY, [
    "-m", "placelink.cli", "annotate-serve",
    "--pairs", join(workdir, "pairs.csv"),
    "--restaurants", join(data, "restaurants.csv"),
    "--pois", join(data, "pois.csv"),
    "--state-dir", join(workdir, "state"),
    "--port", String(port),
    "--initial-n", "60",
    "--seed", "1",
  ], { stdio: "pipe" });
  await until(() => stats().catch(() => null), "server startup", 60_000);
});

afterAll(() => {
  server?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

function truthLabel(pairId: string): 0 | 1 {
  const [rid, pid] = pairId.split("::");
  return truth.has(`${rid},${pid}`) ? 1 : 0;
}

function currentCard(): HTMLElement | null {
  return document.querySelector<HTMLElement>("#screen .pair-card");
}

it("labels 10 pairs, runs a round, rectifies 2; 12 human events land in the log", async () => {
  document.body.innerHTML = '<div id="app"></div>';
  await initApp(document, base);

  const start = await stats();
  expect(start.pending).toBe(60);

  // --- label 10 pairs on the label screen (one via keyboard shortcut)
  let lastPairId = "";
  for (let i = 0; i < 10; i++) {
    const card = await until(async () => {
      const c = currentCard();
      return c && c.dataset.pairId !== lastPairId ? c : null;
    }, "next pair card");
    const pairId = card.dataset.pairId!;
    lastPairId = pairId;
    const label = truthLabel(pairId);
    if (i === 9) {
      document.dispatchEvent(new KeyboardEvent("keydown", { key: label === 1 ? "m" : "u" }));
    } else {
      const button = document.getElementById(label === 1 ? "btn-matched" : "btn-unmatched")!;
      (button as HTMLButtonElement).click();
    }
    await until(
      async () => ((await stats()).labeled === start.labeled + i + 1 ? true : null),
      `label ${i + 1} recorded`,
    );
  }
  const afterLabels = await stats();
  expect(afterLabels.labeled).toBe(10);
  expect(afterLabels.pending).toBe(50);

  // --- one bootstrap round from the rectify screen's round form
  document.getElementById("nav-rectify")!.click();
  await until(async () => document.getElementById("round-go"), "rectify screen");
  (document.getElementById("round-n") as HTMLInputElement).value = "100";
  (document.getElementById("round-seed") as HTMLInputElement).value = "1";
  (document.getElementById("round-go") as HTMLButtonElement).click();
  const roundText = await until(async () => {
    const el = document.getElementById("round-result");
    return el && el.textContent ? el.textContent : null;
  }, "round result");
  const queued = Number(/queued for rectify (\d+)/.exec(roundText)![1]);
  const autoNeg = Number(/auto negatives (\d+)/.exec(roundText)![1]);
  expect(queued + autoNeg).toBe(100);
  expect(queued).toBeGreaterThanOrEqual(2);
  expect((await stats()).round).toBe(1);

  // --- rectify 2 predictions: confirm one, override one
  document.getElementById("nav-label")!.click();
  await until(async () => currentCard(), "label screen back");
  document.getElementById("nav-rectify")!.click();
  await until(
    async () => (document.querySelectorAll(".rectify-row").length === Math.min(queued, 50) ? true : null),
    "rectify queue rendered",
  );
  const rows = Array.from(document.querySelectorAll<HTMLElement>(".rectify-row"));
  const labeledBefore = (await stats()).labeled;
  (rows[0].querySelector(".confirm") as HTMLButtonElement).click();
  await until(async () => ((await stats()).labeled === labeledBefore + 1 ? true : null), "confirm saved");
  (rows[1].querySelector(".override") as HTMLButtonElement).click();
  await until(async () => ((await stats()).labeled === labeledBefore + 2 ? true : null), "override saved");

  // --- server state reflects exactly the 12 human actions
  const final = await stats();
  expect(final.labeled).toBe(10 + autoNeg + 2);
  expect(final.pending).toBe(50 + queued - 2);

  const log = readFileSync(join(workdir, "state", "audit.jsonl"), "utf-8").trim().split("\n");
  const events = log.map((line) => JSON.parse(line) as { op: string; source?: string; label?: number });
  const human = events.filter(
    (e) => e.op === "label" && (e.source === "HUMAN_INITIAL" || e.source === "HUMAN_RECTIFY"),
  );
  expect(human).toHaveLength(12);
  expect(human.filter((e) => e.source === "HUMAN_RECTIFY")).toHaveLength(2);
  const modelEvents = events.filter((e) => e.op === "label" && e.source === "MODEL_CONFIRMED");
  expect(modelEvents).toHaveLength(autoNeg);
  expect(modelEvents.every((e) => e.label === 0)).toBe(true);

  expect(Date.now() - t0).toBeLessThan(120_000);
});
