// Live round trip against the annotation service: three simulated annotators
// drive the UI's own task-flow state machines end to end. Checks that the
// exported ratings reproduce a hand-computed agreement value and that filter
// decisions survive a service restart.

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { AnnotationApi } from "../src/api.js";
import { FilterTaskState } from "../src/filterTask.js";
import { MemoryStore } from "../src/persistence.js";
import { RatingTaskState } from "../src/ratingTask.js";

const REPO_ROOT = path.resolve(__dirname, "..", "..");
const PYTHON = process.env.PYTHON ?? "python3";
const N_SAMPLES = 15; // 15 samples x 4 direction pairings = 60 rating tasks
const PORT = 8779 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

// Planted agreement pattern: a1 and a2 rate every item 1 + ((4s + d) mod 5);
// a3 adds +1 exactly when (4s + d) mod 5 == 0 (12 of 60 items). Observed
// disagreement is then (12 * 2) / 180 and expected disagreement follows from
// 12 occurrences of each value 1..5 per conforming annotator, which works
// out to alpha = 4669/4848.
const EXPECTED_ALPHA = 4669 / 4848;

let workdir: string;
let service: ChildProcess | null = null;

function run(cmd: string, args: string[]): void {
  const result = spawnSync(cmd, args, { cwd: REPO_ROOT, encoding: "utf-8" });
  if (result.status !== 0) {
    throw new Error(`${cmd} ${args.join(" ")} failed:\n${result.stdout}\n${result.stderr}`);
  }
}

async function waitForService(): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const response = await fetch(`${BASE}/progress`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error("annotation service did not come up");
}

function startService(): ChildProcess {
  const child = spawn(
    PYTHON,
    [
      "-m",
      "contrastbench.cli",
      "serve-annotation",
      "--manifest",
      path.join(workdir, "run", "manifest.json"),
      "--state-dir",
      path.join(workdir, "state"),
      "--port",
      String(PORT),
      "--seed",
      "5",
    ],
    { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] },
  );
  return child;
}

async function stopService(child: ChildProcess): Promise<void> {
  child.kill("SIGTERM");
  await new Promise((resolve) => {
    child.once("exit", resolve);
    setTimeout(resolve, 3000);
  });
}

beforeAll(async () => {
  workdir = mkdtempSync(path.join(tmpdir(), "annotation-ui-"));
  run(PYTHON, [
    "scripts/make_annotation_demo.py",
    path.join(workdir, "run"),
    String(N_SAMPLES),
    "2",
  ]);
  service = startService();
  await waitForService();
});

afterAll(async () => {
  if (service) await stopService(service);
});

const RATE_ID = /^rate--demo-(\d+)--t_(original|contrast)--i_(original|contrast)$/;
const DIRECTION_CODE: Record<string, number> = {
  "original|original": 0,
  "contrast|contrast": 1,
  "original|contrast": 2,
  "contrast|original": 3,
};
const ATTENTION_RANGE = /between (\d+\.\d+) and (\d+\.\d+)/;

function plannedValue(taskId: string, annotatorIndex: number): number {
  const match = RATE_ID.exec(taskId);
  if (!match) throw new Error(`unexpected rating task id ${taskId}`);
  const sample = Number(match[1]);
  const code = DIRECTION_CODE[`${match[2]}|${match[3]}`]!;
  const residue = (4 * sample + code) % 5;
  const base = 1 + residue;
  if (annotatorIndex === 2 && residue === 0) return base + 1;
  return base;
}

async function drive(annotator: string, annotatorIndex: number): Promise<{
  filtersDone: number;
  ratingsDone: number;
  checksSeen: number;
}> {
  const api = new AnnotationApi(BASE, (url, init) => fetch(url, init));
  const store = new MemoryStore();
  let filtersDone = 0;
  let ratingsDone = 0;
  let checksSeen = 0;

  for (;;) {
    const task = await api.nextTask(annotator);
    if (task === null) break;
    if (task.kind === "filter") {
      const state = new FilterTaskState(task, store, annotator);
      state.acceptRemaining();
      const result = await state.submit(api);
      expect(result.ok).toBe(true);
      filtersDone += 1;
    } else {
      const state = new RatingTaskState(task, store, annotator);
      if (task.is_attention_check) {
        checksSeen += 1;
        const range = ATTENTION_RANGE.exec(task.prompt_text);
        expect(range).not.toBeNull();
        const lo = Number(range![1]);
        const hi = Number(range![2]);
        state.setValue((lo + hi) / 2);
      } else {
        state.setValue(plannedValue(task.task_id, annotatorIndex));
        ratingsDone += 1;
      }
      expect(await state.submit(api)).toBe(true);
    }
  }
  return { filtersDone, ratingsDone, checksSeen };
}

interface ExportedRecord {
  annotator_id: string;
  item_id: string;
  value: number;
  is_attention_check: boolean;
}

function intervalAlpha(records: ExportedRecord[]): number {
  const byItem = new Map<string, number[]>();
  for (const record of records) {
    if (!byItem.has(record.item_id)) byItem.set(record.item_id, []);
    byItem.get(record.item_id)!.push(record.value);
  }
  const units = [...byItem.values()].filter((values) => values.length > 1);
  const n = units.reduce((total, values) => total + values.length, 0);
  let observed = 0;
  const pooled: number[] = [];
  for (const values of units) {
    let unitSum = 0;
    for (const a of values) {
      for (const b of values) {
        unitSum += (a - b) ** 2;
      }
    }
    observed += unitSum / (values.length - 1);
    pooled.push(...values);
  }
  observed /= n;
  let expected = 0;
  for (const a of pooled) {
    for (const b of pooled) {
      expected += (a - b) ** 2;
    }
  }
  expected /= n * (n - 1);
  return 1 - observed / expected;
}

describe("annotation round trip", () => {
  it(
    "three annotators produce the planted agreement and decisions survive restart",
    async () => {
      // annotator one does the filtering first (service serves filters first)
      const first = await drive("a1", 0);
      expect(first.filtersDone).toBe(N_SAMPLES * 2);
      expect(first.ratingsDone).toBe(N_SAMPLES * 4);
      expect(first.checksSeen).toBeGreaterThanOrEqual(4); // every ~12 ratings

      // restart the service: filter decisions and ratings must persist
      await stopService(service!);
      service = startService();
      await waitForService();
      const progress = await new AnnotationApi(BASE, (u, i) => fetch(u, i)).progress();
      const accepted = Object.values(progress.filter).reduce(
        (total, bucket) => total + bucket.accepted,
        0,
      );
      expect(accepted).toBe(N_SAMPLES * 2 * 2); // every image accepted
      expect(progress.ratings.completed["a1"]).toBeGreaterThanOrEqual(N_SAMPLES * 4);

      const second = await drive("a2", 1);
      const third = await drive("a3", 2);
      expect(second.ratingsDone).toBe(N_SAMPLES * 4);
      expect(second.filtersDone).toBe(0); // filtering already complete
      expect(third.ratingsDone).toBe(N_SAMPLES * 4);

      // export through the CLI and verify the agreement level
      const exportPath = path.join(workdir, "ratings.jsonl");
      run(PYTHON, [
        "-m",
        "contrastbench.cli",
        "export-ratings",
        "--manifest",
        path.join(workdir, "run", "manifest.json"),
        "--state-dir",
        path.join(workdir, "state"),
        "--out",
        exportPath,
        "--seed",
        "5",
      ]);
      const records = readFileSync(exportPath, "utf-8")
        .split("\n")
        .filter((line) => line.trim())
        .map((line) => JSON.parse(line) as ExportedRecord);
      const real = records.filter((r) => !r.is_attention_check);
      expect(real).toHaveLength(3 * N_SAMPLES * 4);

      const alpha = intervalAlpha(real);
      expect(Math.abs(alpha - EXPECTED_ALPHA)).toBeLessThan(1e-9);

      // cross-check with the harness's own statistics implementation
      const pythonAlpha = spawnSync(
        PYTHON,
        [
          "-c",
          [
            "import sys",
            "from contrastbench.stats import load_ratings, krippendorff_alpha_interval",
            "records = [r for r in load_ratings(sys.argv[1]) if not r.is_attention_check]",
            "print(repr(krippendorff_alpha_interval(records)))",
          ].join("\n"),
          exportPath,
        ],
        { cwd: REPO_ROOT, encoding: "utf-8" },
      );
      expect(pythonAlpha.status).toBe(0);
      expect(Math.abs(Number(pythonAlpha.stdout.trim()) - EXPECTED_ALPHA)).toBeLessThan(
        1e-9,
      );
    },
    180_000,
  );
});
