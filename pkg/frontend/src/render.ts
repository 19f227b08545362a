/** HTML templates. Pure string builders so the bindings are testable without
 * a browser; every money value is emitted with a data-minor-units attribute
 * carrying the raw API serialization. */

import type { MoneyCell, BillRow, PaidBillRow, FlagRow, ReportView } from "./stores.js";
import type { VerifyResult } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function moneySpan(cell: MoneyCell, cssClass = "amount"): string {
  return `<span class="${cssClass}" data-minor-units="${cell.raw}">${cell.display}</span>`;
}

export function invoiceCard(bill: BillRow): string {
  const payer = bill.payer ? ` by ${escapeHtml(bill.payer)}` : "";
  return `
  <article class="card bill ${bill.status}" data-bill-id="${bill.billId}">
    <header><strong>Invoice #${bill.billId}</strong>
      <span class="status ${bill.status}">${bill.status}${payer}</span></header>
    <dl>
      <dt>payee</dt><dd>${escapeHtml(bill.payee)}</dd>
      <dt>amount</dt><dd>${moneySpan(bill.amount)}</dd>
      <dt>tax</dt><dd>${moneySpan(bill.taxAmount, "amount tax")}</dd>
      <dt>memo</dt><dd>${escapeHtml(bill.memo)}</dd>
    </dl>
  </article>`;
}

export function payableRow(bill: BillRow): string {
  return `
  <tr data-bill-id="${bill.billId}">
    <td>#${bill.billId}</td>
    <td>${escapeHtml(bill.payee)}</td>
    <td>${escapeHtml(bill.memo)}</td>
    <td>${moneySpan(bill.amount)}</td>
    <td><button class="pay" data-bill-id="${bill.billId}" data-value="${bill.amount.raw}">
      pay ${bill.amount.display}</button></td>
  </tr>`;
}

export function paidRow(bill: PaidBillRow): string {
  const indicator =
    bill.taxRemitted === "remitted"
      ? `<span class="indicator ok">tax remitted</span>`
      : bill.taxRemitted === "pending"
        ? `<span class="indicator warn">remittance pending</span>`
        : `<span class="indicator">awaiting ledger</span>`;
  return `
  <tr data-bill-id="${bill.billId}">
    <td>#${bill.billId}</td>
    <td>${escapeHtml(bill.payee)}</td>
    <td>${moneySpan(bill.amount)}</td>
    <td>${moneySpan(bill.taxAmount, "amount tax")}</td>
    <td>${bill.paidPeriod ?? ""}</td>
    <td>${indicator}</td>
  </tr>`;
}

export function flagTable(flags: FlagRow[]): string {
  if (flags.length === 0) {
    return `<p class="empty">No positive discrepancies in this period.</p>`;
  }
  const rows = flags
    .map(
      (flag) => `
    <tr data-seller="${escapeHtml(flag.seller)}">
      <td><a href="#" class="drill" data-seller="${escapeHtml(flag.seller)}">${escapeHtml(flag.seller)}</a></td>
      <td>${moneySpan(flag.discrepancy, "amount bad")}</td>
    </tr>`,
    )
    .join("");
  return `<table class="flags"><thead><tr><th>seller</th><th>discrepancy</th></tr></thead>
    <tbody>${rows}</tbody></table>`;
}

export function reportPanel(view: ReportView): string {
  return `
  <section class="card report" data-seller="${escapeHtml(view.seller)}" data-period="${view.period}">
    <header><strong>${escapeHtml(view.seller)}</strong> - ${view.period}</header>
    <dl>
      <dt>tax collected</dt><dd>${moneySpan(view.collected)}</dd>
      <dt>tax remitted</dt><dd>${moneySpan(view.remitted)}</dd>
      <dt>discrepancy</dt><dd>${moneySpan(view.discrepancy, "amount bad")}</dd>
      <dt>bills</dt><dd>${view.billIds.map((id) => `#${id}`).join(", ") || "none"}</dd>
    </dl>
  </section>`;
}

export function verifyBadge(result: VerifyResult): string {
  if (result.ok) {
    const blocks = result.height !== undefined ? result.height + 1 : "?";
    return `<span class="verify ok">chain ok (${blocks} blocks)</span>`;
  }
  const v = result.violation;
  return `<span class="verify bad">violation at height ${v?.height}: ${escapeHtml(v?.reason ?? "")}</span>`;
}
