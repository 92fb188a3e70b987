/** Display formatting shared by every view so numbers stay consistent. */

/** All alignment values are shown at three decimals, everywhere. */
export function formatValue(value: number): string {
  return value.toFixed(3);
}

/**
 * Heat shade for one cell. `reference` is the scale ceiling: the global
 * matrix maximum for fully comparable methods, the row maximum when values
 * are only comparable within a row.
 */
export function heatIntensity(value: number, reference: number): number {
  if (!(reference > 0)) return 0;
  return Math.max(0, Math.min(1, value / reference));
}

export function heatColor(intensity: number): string {
  // White through a saturated blue; keep text readable on the strong end.
  const level = Math.round(255 - intensity * 160);
  return `rgb(${level - 30}, ${level}, 255)`;
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
