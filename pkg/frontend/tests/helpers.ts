// Spawn the real gateway and CLI from the primary package; the console is
// tested against the actual HTTP surface, never against mocks.

import { ChildProcess, execFile, spawn } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import * as path from "node:path";

export const REPO_ROOT = path.resolve(__dirname, "..", "..");
export const DEMO_SCENARIO = path.join(REPO_ROOT, "scenarios", "demo.json");
const PYTHON = process.env.PYTHON ?? "python3";

export function tempStore(name: string): string {
  return path.join(mkdtempSync(path.join(tmpdir(), "umphcs-")), name);
}

export interface Gateway {
  endpoint: string;
  storePath: string;
  proc: ChildProcess;
  close(): void;
}

export async function startGateway(options: { scenario?: string } = {}): Promise<Gateway> {
  const storePath = tempStore("gateway.jsonl");
  const args = [
    "-m", "umphcs", "--store", storePath,
    "serve", "gateway", "--port", "0",
  ];
  if (options.scenario) {
    args.push("--scenario", options.scenario);
  }
  const proc = spawn(PYTHON, args, { cwd: REPO_ROOT, stdio: ["ignore", "pipe", "pipe"] });
  const endpoint = await new Promise<string>((resolve, reject) => {
    let out = "";
    const timer = setTimeout(() => reject(new Error(`gateway never started: ${out}`)), 30_000);
    proc.stdout!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
      const match = out.match(/gateway on (http:\/\/[\d.]+:\d+)/);
      if (match) {
        clearTimeout(timer);
        resolve(match[1]);
      }
    });
    proc.stderr!.on("data", (chunk: Buffer) => {
      out += chunk.toString();
    });
    proc.on("exit", (code) => reject(new Error(`gateway exited ${code}: ${out}`)));
  });
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(endpoint + "/patients");
      if (resp.ok) {
        await resp.json();
        break;
      }
    } catch {
      await new Promise((r) => setTimeout(r, 100));
    }
  }
  return {
    endpoint,
    storePath,
    proc,
    close() {
      proc.kill("SIGTERM");
    },
  };
}

export function runCli(storePath: string, args: string[]): Promise<{ stdout: string; code: number }> {
  return new Promise((resolve, reject) => {
    execFile(
      PYTHON,
      ["-m", "umphcs", "--store", storePath, ...args],
      { cwd: REPO_ROOT, timeout: 120_000 },
      (error, stdout, stderr) => {
        if (error && typeof error.code !== "number") {
          reject(new Error(`cli failed to run: ${error.message}\n${stderr}`));
          return;
        }
        resolve({ stdout, code: error ? (error.code as number) : 0 });
      },
    );
  });
}

export interface StoredRecord {
  kind: string;
  patient_id: string;
  payload: Record<string, unknown>;
}

/** Store records normalized for equivalence checks: ids, timestamps and
 * device ids stripped, marker/patient lines dropped. */
export function readRecords(storePath: string): StoredRecord[] {
  const out: StoredRecord[] = [];
  for (const line of readFileSync(storePath, "utf-8").split("\n")) {
    if (!line) {
      continue;
    }
    const obj = JSON.parse(line) as Record<string, unknown>;
    if (obj.kind === "patient" || obj.kind === "synced" || obj.payload === undefined) {
      continue;
    }
    out.push({
      kind: obj.kind as string,
      patient_id: obj.patient_id as string,
      payload: obj.payload as Record<string, unknown>,
    });
  }
  return out;
}
