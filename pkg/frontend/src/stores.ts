/** Per-role view models. These bind API responses to display rows without
 * doing arithmetic on amounts: every money field keeps its raw serialized
 * value next to the formatted one, so what the screens show is traceable
 * byte-for-byte to a single API response field. */

import type { ApiClient } from "./api.js";
import { ApiError } from "./api.js";
import { formatMinorUnits, rawAmount } from "./money.js";
import type { Bill, FlagEntry, TaxReport } from "./types.js";

export interface MoneyCell {
  raw: string; // exact API field serialization
  display: string; // formatted minor units, display only
}

function money(minorUnits: number): MoneyCell {
  return { raw: rawAmount(minorUnits), display: formatMinorUnits(minorUnits) };
}

export interface BillRow {
  billId: number;
  payee: string;
  amount: MoneyCell;
  taxAmount: MoneyCell;
  memo: string;
  status: string;
  payer: string | null;
  paidPeriod: string | null;
}

export function billRow(bill: Bill): BillRow {
  return {
    billId: bill.bill_id,
    payee: bill.payee,
    amount: money(bill.amount),
    taxAmount: money(bill.tax_amount),
    memo: bill.memo,
    status: bill.status,
    payer: bill.payer,
    paidPeriod: bill.paid_period,
  };
}

// --- shopkeeper ------------------------------------------------------------

export interface ShopkeeperModel {
  accountId: string;
  bills: BillRow[];
}

export async function loadShopkeeperModel(client: ApiClient, accountId: string): Promise<ShopkeeperModel> {
  const listing = await client.bills({ payee: accountId });
  return { accountId, bills: listing.bills.map(billRow) };
}

// --- customer ---------------------------------------------------------------

export type RemittanceIndicator = "remitted" | "pending" | "unknown";

export interface PaidBillRow extends BillRow {
  taxRemitted: RemittanceIndicator;
}

export interface CustomerModel {
  accountId: string;
  balance: MoneyCell;
  payable: BillRow[];
  paid: PaidBillRow[];
}

/** The per-bill "tax truly remitted" indicator: the seller's report for the
 * period the payment landed in must cover what it collected. */
export async function remittanceIndicator(
  client: ApiClient,
  bill: Bill,
): Promise<RemittanceIndicator> {
  if (bill.status !== "paid" || bill.paid_period === null) {
    return "unknown";
  }
  try {
    const report = await client.taxReport(bill.payee, bill.paid_period);
    return report.tax_remitted >= report.tax_collected ? "remitted" : "pending";
  } catch (error) {
    if (error instanceof ApiError) {
      return "unknown";
    }
    throw error;
  }
}

export async function loadCustomerModel(client: ApiClient, accountId: string): Promise<CustomerModel> {
  const me = await client.me();
  const open = await client.bills({ status: "unpaid" });
  const settled = await client.bills({ status: "paid" });
  const own = settled.bills.filter((bill) => bill.payer === accountId);
  const paid: PaidBillRow[] = [];
  for (const bill of own) {
    paid.push({ ...billRow(bill), taxRemitted: await remittanceIndicator(client, bill) });
  }
  return {
    accountId,
    balance: money(me.balance ?? 0),
    payable: open.bills.map(billRow),
    paid,
  };
}

// --- auditor -----------------------------------------------------------------

export interface FlagRow {
  seller: string;
  discrepancy: MoneyCell;
}

export interface ReportView {
  seller: string;
  period: string;
  collected: MoneyCell;
  remitted: MoneyCell;
  discrepancy: MoneyCell;
  billIds: number[];
}

export interface AuditorModel {
  period: string;
  flags: FlagRow[];
}

export function reportView(report: TaxReport): ReportView {
  return {
    seller: report.seller,
    period: report.period,
    collected: money(report.tax_collected),
    remitted: money(report.tax_remitted),
    discrepancy: money(report.discrepancy),
    billIds: report.bill_ids,
  };
}

export function flagRows(flags: FlagEntry[]): FlagRow[] {
  return flags.map((entry) => ({
    seller: entry.seller,
    discrepancy: money(entry.discrepancy),
  }));
}

export async function loadAuditorModel(client: ApiClient, period: string): Promise<AuditorModel> {
  const flags = await client.flags(period);
  return { period, flags: flagRows(flags) };
}
