// Console acceptance: UI-driven sessions must store exactly what CLI runs
// store (modulo ids and timestamps), the live stream must deliver at least
// ten updates a second, and the eye-power display must match the CLI
// oracle code for code.

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { GatewayClient } from "../src/api.js";
import { SessionView, isGap } from "../src/session.js";
import {
  DEMO_SCENARIO,
  Gateway,
  readRecords,
  runCli,
  startGateway,
  tempStore,
} from "./helpers.js";
import { writeFileSync } from "node:fs";
import * as path from "node:path";
import { tmpdir } from "node:os";

const FLAT_30: Record<number, number> = {
  250: 30, 500: 30, 1000: 30, 2000: 30, 4000: 30, 8000: 30,
};

function hears(profile: Record<number, number>, freq: number, level: number): boolean {
  const threshold = profile[freq];
  return threshold !== undefined && level >= threshold;
}

describe("operator console against the live gateway", () => {
  let gateway: Gateway;
  let client: GatewayClient;
  let cliStore: string;

  beforeAll(async () => {
    gateway = await startGateway({ scenario: DEMO_SCENARIO });
    client = new GatewayClient(gateway.endpoint);
    cliStore = tempStore("cli.jsonl");
    const cli = await runCli(cliStore, ["scenario", "run", DEMO_SCENARIO]);
    expect(cli.code).toBe(0);
  });

  afterAll(() => {
    gateway?.close();
  });

  it("lists the scenario patients", async () => {
    const view = await client.patients();
    const ids = view.patients.map((p) => p.patient_id).sort();
    expect(ids).toEqual(["p1", "p2"]);
  });

  it("UI-driven hearing session stores the same record as the CLI run", async () => {
    const session = new SessionView(client);
    const started = await session.start("p2", "hearing");
    expect(started?.phase).toBe("awaiting-response");

    let freq = 250;
    let level = -5;
    for (let guard = 0; guard < 120; guard++) {
      const out = await session.clickHeard(hears(FLAT_30, freq, level));
      expect(out).not.toBeNull();
      if (out && "phase" in out) {
        break; // finished: the gateway returned the final result view
      }
      const prompt = out as { freq_hz: number; level_db: number };
      freq = prompt.freq_hz;
      level = prompt.level_db;
    }
    const final = await session.waitForCompletion();
    expect(final.phase).toBe("done");

    const cliHearing = readRecords(cliStore).find((r) => r.kind === "hearing");
    const uiHearing = readRecords(gateway.storePath).find((r) => r.kind === "hearing");
    expect(uiHearing).toBeDefined();
    expect(uiHearing!.payload).toEqual(cliHearing!.payload);
    expect(uiHearing!.patient_id).toBe(cliHearing!.patient_id);
    // rendered audiogram data equals GET /session/result exactly
    expect(final.result).toEqual(uiHearing!.payload);
  });

  it("no clicks at all ends in NoResponse everywhere", async () => {
    const session = new SessionView(client);
    await session.start("p2", "hearing");
    for (let guard = 0; guard < 120; guard++) {
      const out = await session.clickHeard(false); // operator lets every tone time out
      if (out && "phase" in out) {
        break;
      }
    }
    const final = await session.waitForCompletion();
    const gram = final.result!.audiogram as Record<string, number | null>;
    expect(Object.values(gram)).toEqual([null, null, null, null, null, null]);
  });

  it("click after the session is done surfaces a banner, never silence", async () => {
    const session = new SessionView(client);
    let banner = "";
    session.onBanner((text) => {
      banner = text || banner;
    });
    const out = await session.clickHeard(true); // no active session anymore
    expect(out).toBeNull();
    expect(banner).toBe("no active session");
  });

  it("UI-driven BP session matches the CLI record and streams >= 10 Hz", async () => {
    const session = new SessionView(client);
    const t0 = Date.now();
    const started = await session.start("p1", "blood_pressure");
    expect(started?.phase).toBe("running");
    const final = await session.waitForCompletion(100);
    const elapsedS = (Date.now() - t0) / 1000;
    expect(final.phase).toBe("done");

    const dataEvents = session.events.filter((ev) => !isGap(ev) && "cuff_mmHg" in ev);
    expect(dataEvents.length / elapsedS).toBeGreaterThanOrEqual(10);
    const last = dataEvents[dataEvents.length - 1] as Record<string, number>;
    expect(last).toHaveProperty("t_s");
    expect(last).toHaveProperty("ow");

    const cliBp = readRecords(cliStore).find((r) => r.kind === "blood_pressure");
    const uiBp = readRecords(gateway.storePath).find((r) => r.kind === "blood_pressure");
    expect(uiBp!.payload).toEqual(cliBp!.payload);
    // final card numbers are exactly the gateway's result payload
    expect(final.result).toEqual(uiBp!.payload);
  });

  it("eye-power display equals the CLI oracle at 20 random codes", async () => {
    const codes: number[] = [];
    let seed = 0x2026;
    for (let i = 0; i < 20; i++) {
      seed = (seed * 1103515245 + 12345) & 0x7fffffff;
      codes.push(seed % 1024);
    }

    const oracleScenario = {
      name: "eye-oracle",
      seed: 1,
      patients: [{ patient_id: "p1", name: "P", region: "dhaka" }],
      tests: codes.map((code) => ({ test: "eye_power", patient: "p1", pot_code: code })),
    };
    const scenarioPath = path.join(tmpdir(), `eye-oracle-${process.pid}.json`);
    writeFileSync(scenarioPath, JSON.stringify(oracleScenario));
    const oracleStore = tempStore("oracle.jsonl");
    const cli = await runCli(oracleStore, ["scenario", "run", scenarioPath]);
    expect(cli.code).toBe(0);
    const oracle = readRecords(oracleStore).map((r) => r.payload.diopters as number);

    const session = new SessionView(client);
    await session.start("p1", "eye_power");
    const displayed: number[] = [];
    for (const code of codes) {
      const reading = await session.movePot(code);
      expect(reading).not.toBeNull();
      displayed.push(reading!.power_d);
    }
    await session.stop();
    expect(displayed).toEqual(oracle);
  });

  it("slider endpoints show the bench range limits", async () => {
    const session = new SessionView(client);
    await session.start("p1", "eye_power");
    const low = await session.movePot(0);
    const high = await session.movePot(1023);
    await session.stop();
    expect(low!.power_d).toBeCloseTo(-1.3, 6);
    expect(high!.power_d).toBeCloseTo(17.5, 6);
  });

  it("temperature and weight sessions round-trip the emulated patient", async () => {
    const session = new SessionView(client);
    const temp = await session.start("p1", "temperature", { true_temp_c: 38.0 });
    expect(temp?.phase).toBe("done");
    expect(Math.abs((temp!.result!.celsius as number) - 38.0)).toBeLessThanOrEqual(0.5);

    const weight = await session.start("p1", "weight", { true_weight_kg: 64.0 });
    expect(weight?.phase).toBe("done");
    expect(Math.abs((weight!.result!.kg as number) - 64.0)).toBeLessThanOrEqual(0.2);
  });

  it("patients view carries history for review after sessions", async () => {
    const view = await client.patients();
    const p1 = view.patients.find((p) => p.patient_id === "p1")!;
    expect(p1.history.length).toBeGreaterThan(0);
    const kinds = new Set(p1.history.map((h) => h.kind));
    expect(kinds.has("blood_pressure")).toBe(true);
  });
});
