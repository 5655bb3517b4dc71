/** Display helpers. API values are shown verbatim up to 3-decimal rounding. */

export function fmt3(x: number): string {
  return x.toFixed(3);
}

export function meters(x: number): string {
  return `${fmt3(x)} m`;
}

export function percent(x: number): string {
  return `${(100 * x).toFixed(1)}%`;
}

/** External map link for a manual check of the pair's surroundings. */
export function osmLink(lat: number, lon: number): string {
  return `https://www.openstreetmap.org/?mlat=${lat}&mlon=${lon}#map=18/${lat}/${lon}`;
}

export function escapeHtml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
