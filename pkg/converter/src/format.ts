/**
 * Emission of the engine's canonical dataset text format.
 *
 * The byte layout must match the engine's own serializer exactly, because
 * the embedded SHA-256 checksum is recomputed by the engine over its
 * canonical re-serialization at load time. The one subtle piece is float
 * formatting: feature values are written the way CPython's repr() prints
 * a float (shortest round-trip digits, fixed notation for decimal
 * exponents in (-4, 16], otherwise scientific with a signed two-digit
 * exponent).
 */

import { createHash } from "crypto";

import { AssembledDataset } from "./planetoid";

export function pythonFloatRepr(value: number): string {
  if (!Number.isFinite(value)) {
    if (Number.isNaN(value)) return "nan";
    return value > 0 ? "inf" : "-inf";
  }
  if (value === 0) {
    return Object.is(value, -0) ? "-0.0" : "0.0";
  }
  const sign = value < 0 ? "-" : "";
  const text = Math.abs(value).toString();

  // split JS shortest form into significant digits and a decimal point
  // position: |value| = 0.<digits> * 10^decpt
  let digits: string;
  let decpt: number;
  const eIdx = text.indexOf("e");
  if (eIdx >= 0) {
    const mantissa = text.slice(0, eIdx).replace(".", "");
    const exp = parseInt(text.slice(eIdx + 1), 10);
    digits = mantissa;
    decpt = exp + 1;
  } else {
    const dot = text.indexOf(".");
    if (dot < 0) {
      digits = text;
      decpt = text.length;
    } else {
      const whole = text.slice(0, dot);
      const frac = text.slice(dot + 1);
      if (whole === "0") {
        const stripped = frac.replace(/^0+/, "");
        digits = stripped;
        decpt = -(frac.length - stripped.length);
      } else {
        digits = whole + frac;
        decpt = whole.length;
      }
    }
  }
  digits = digits.replace(/0+$/, "");
  if (digits === "") {
    digits = "0";
  }

  if (decpt > -4 && decpt <= 16) {
    // fixed notation (repr uses it while the point position is in (-4, 16])
    if (decpt <= 0) {
      return `${sign}0.${"0".repeat(-decpt)}${digits}`;
    }
    if (decpt >= digits.length) {
      return `${sign}${digits}${"0".repeat(decpt - digits.length)}.0`;
    }
    return `${sign}${digits.slice(0, decpt)}.${digits.slice(decpt)}`;
  }
  const exponent = decpt - 1;
  const mantissa = digits.length > 1 ? `${digits[0]}.${digits.slice(1)}` : digits;
  const expSign = exponent < 0 ? "-" : "+";
  const expDigits = String(Math.abs(exponent)).padStart(2, "0");
  return `${sign}${mantissa}e${expSign}${expDigits}`;
}

const SCHEMA_VERSION = 1;

export interface EmitResult {
  text: string;
  checksum: string;
  metaEntries: Record<string, string>;
}

export function emitGraphtxt(ds: AssembledDataset): EmitResult {
  const extras: Record<string, string> = {
    num_edges_directed: String(ds.directedEntries),
    source: "planetoid",
  };
  if (ds.isolatedTestNodes > 0) {
    extras["isolated_test_nodes"] = String(ds.isolatedTestNodes);
  }
  if (ds.sourceSelfLoops > 0) {
    extras["source_self_loops_dropped"] = String(ds.sourceSelfLoops);
  }

  const metaLines = [
    `schema=${SCHEMA_VERSION}`,
    `name=${ds.name}`,
    `num_nodes=${ds.numNodes}`,
    `num_edges_undirected=${ds.edges.length}`,
    `num_classes=${ds.numClasses}`,
    `feature_dim=${ds.featureDim}`,
    // the emitted edge list already has self-loops removed
    "self_loops_dropped=0",
    ...Object.keys(extras).sort().map((k) => `${k}=${extras[k]}`),
  ];

  const lines: string[] = ["#meta", ...metaLines, "#edges"];
  for (const [u, v] of ds.edges) {
    lines.push(`${u} ${v}`);
  }
  lines.push("#features");
  for (const [node, dim, value] of ds.features) {
    lines.push(`${node} ${dim} ${pythonFloatRepr(value)}`);
  }
  lines.push("#labels");
  for (let node = 0; node < ds.numNodes; node++) {
    if (ds.labels[node] >= 0) {
      lines.push(`${node} ${ds.labels[node]}`);
    }
  }
  lines.push("#masks");
  const kinds = new Map<number, string>();
  for (const id of ds.trainIds) kinds.set(id, "train");
  for (const id of ds.valIds) kinds.set(id, "val");
  for (const id of ds.testIds) kinds.set(id, "test");
  for (let node = 0; node < ds.numNodes; node++) {
    const kind = kinds.get(node);
    if (kind) lines.push(`${node} ${kind}`);
  }

  const body = lines.join("\n") + "\n";
  const checksum = createHash("sha256").update(body, "utf8").digest("hex");
  const edgesAt = lines.indexOf("#edges");
  const withChecksum = [
    ...lines.slice(0, edgesAt),
    `checksum=${checksum}`,
    ...lines.slice(edgesAt),
  ];
  const metaEntries: Record<string, string> = {};
  for (const line of metaLines) {
    const eq = line.indexOf("=");
    metaEntries[line.slice(0, eq)] = line.slice(eq + 1);
  }
  metaEntries["checksum"] = checksum;
  return { text: withChecksum.join("\n") + "\n", checksum, metaEntries };
}
