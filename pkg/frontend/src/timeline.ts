/**
 * Historical event table: CSV parsing and the timeline range filter.
 * Filter semantics mirror the server side exactly: inclusive date range,
 * bare years expand to Jan 1 / Dec 31, order preserved.
 */

export interface LandslideEvent {
  id: string;
  date: string; // ISO yyyy-mm-dd
  x: number;
  y: number;
  scale: number | string;
  description: string;
}

export type RangeBound = number | string; // year or ISO date

const HEADER = ["id", "date", "x", "y", "scale", "description"];

/** Minimal RFC-4180 row splitter (quotes, doubled quotes, commas). */
export function splitCsvRow(line: string): string[] {
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          field += '"';
          i++;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  out.push(field);
  return out;
}

export function parseEventsCsv(text: string): LandslideEvent[] {
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  if (lines.length === 0) throw new Error("empty events file");
  const header = splitCsvRow(lines[0]).map((h) => h.trim());
  if (header.join(",") !== HEADER.join(",")) {
    throw new Error(`malformed header: ${lines[0]}`);
  }
  return lines.slice(1).map((line, i) => {
    const row = splitCsvRow(line);
    if (row.length !== HEADER.length) {
      throw new Error(`line ${i + 2}: expected ${HEADER.length} fields`);
    }
    if (!/^\d{4}-\d{2}-\d{2}$/.test(row[1].trim())) {
      throw new Error(`line ${i + 2}: unparseable date ${row[1]}`);
    }
    const scaleNum = Number(row[4]);
    return {
      id: row[0].trim(),
      date: row[1].trim(),
      x: Number(row[2]),
      y: Number(row[3]),
      scale: Number.isFinite(scaleNum) && row[4].trim() !== "" ? scaleNum : row[4].trim(),
      description: row[5],
    };
  });
}

function boundToDate(bound: RangeBound, endOfYear: boolean): string {
  if (typeof bound === "number") {
    return endOfYear ? `${bound}-12-31` : `${bound}-01-01`;
  }
  return bound;
}

export function filterEvents(
  events: LandslideEvent[],
  start: RangeBound,
  end: RangeBound,
): LandslideEvent[] {
  const lo = boundToDate(start, false);
  const hi = boundToDate(end, true);
  if (lo > hi) throw new Error(`inverted range: ${lo} > ${hi}`);
  return events.filter((e) => e.date >= lo && e.date <= hi);
}

/** Glyph radius in pixels, proportional to the cube root of the volume. */
export function glyphRadius(scale: number | string, minPx = 4, maxPx = 22): number {
  if (typeof scale !== "number" || !(scale > 0)) return minPx;
  const r = 2.2 * Math.cbrt(scale);
  return Math.min(maxPx, Math.max(minPx, r));
}
