/** Loads the recorded service exchange used as the contract fixture. */
import { readFileSync } from "node:fs";

export interface RecordedStep {
  name: string;
  method: string;
  path: string;
  params: Record<string, string>;
  status: number;
  body: string;
}

const doc = JSON.parse(
  readFileSync(new URL("./fixtures/service_flow.json", import.meta.url), "utf8"),
) as { steps: RecordedStep[] };

export function step(name: string): RecordedStep {
  const found = doc.steps.find((s) => s.name === name);
  if (!found) throw new Error(`fixture has no step named ${name}`);
  return found;
}

/** Unwrapped `data` member of a recorded response body. */
export function payload<T>(name: string): T {
  return (JSON.parse(step(name).body) as { data: T }).data;
}
