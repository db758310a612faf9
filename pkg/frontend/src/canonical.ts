// Canonical view-model hashing, the exact mirror of the server's rule:
// every number is folded to floor(x * 1e9 + 0.5), objects serialize with
// lexicographically sorted keys, and non-ASCII characters are \u-escaped
// the way the server's JSON encoder writes them. Identical float64
// arithmetic on both sides makes the hashes match bit-for-bit.

import { sha256Hex } from "./sha256.js";

export type Json = null | boolean | number | string | Json[] | { [key: string]: Json };

export function quantize(value: Json): Json {
  if (typeof value === "number") {
    return Math.floor(value * 1e9 + 0.5);
  }
  if (Array.isArray(value)) {
    return value.map(quantize);
  }
  if (value !== null && typeof value === "object") {
    const out: { [key: string]: Json } = {};
    for (const key of Object.keys(value)) {
      out[key] = quantize(value[key]);
    }
    return out;
  }
  return value;
}

const ESCAPES: { [c: string]: string } = {
  '"': '\\"',
  "\\": "\\\\",
  "\b": "\\b",
  "\f": "\\f",
  "\n": "\\n",
  "\r": "\\r",
  "\t": "\\t",
};

function escapeString(s: string): string {
  let out = '"';
  for (let i = 0; i < s.length; i++) {
    const ch = s[i];
    const code = s.charCodeAt(i);
    if (ESCAPES[ch] !== undefined) {
      out += ESCAPES[ch];
    } else if (code < 0x20 || code > 0x7e) {
      out += "\\u" + code.toString(16).padStart(4, "0");
    } else {
      out += ch;
    }
  }
  return out + '"';
}

export function canonicalStringify(value: Json): string {
  if (value === null) return "null";
  if (typeof value === "boolean") return value ? "true" : "false";
  if (typeof value === "number") return String(value);
  if (typeof value === "string") return escapeString(value);
  if (Array.isArray(value)) {
    return "[" + value.map(canonicalStringify).join(",") + "]";
  }
  const keys = Object.keys(value).sort();
  const parts = keys.map((k) => escapeString(k) + ":" + canonicalStringify(value[k]));
  return "{" + parts.join(",") + "}";
}

export function stateHash(vm: Json): string {
  return sha256Hex(canonicalStringify(quantize(vm)));
}
