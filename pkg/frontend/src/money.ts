/** Display helpers for integer minor-unit amounts. Formatting only: the raw
 * integers from the API are never parsed back or used in arithmetic here. */

export function formatMinorUnits(minorUnits: number): string {
  const negative = minorUnits < 0;
  const magnitude = Math.abs(minorUnits);
  const whole = Math.floor(magnitude / 100);
  const cents = String(magnitude % 100).padStart(2, "0");
  return `${negative ? "-" : ""}${whole}.${cents}`;
}

/** The exact serialized form of an API amount field; used for data binding so
 * displayed values stay byte-equal to the server's JSON. */
export function rawAmount(minorUnits: number): string {
  return String(minorUnits);
}
