/** Payload shapes of the chainvoice HTTP API. Amounts are integers in minor
 * currency units and are never recomputed client-side. */

export type Role =
  | "shopkeeper"
  | "customer"
  | "state_tax_authority"
  | "central_tax_authority"
  | "other_authority";

export interface Me {
  account_id: string;
  role: Role;
  registered: boolean;
  balance: number | null;
}

export interface Account {
  account_id: string;
  role: Role;
  balance: number;
}

export interface Bill {
  bill_id: number;
  payee: string;
  amount: number;
  tax_amount: number;
  memo: string;
  status: "unpaid" | "paid";
  payer: string | null;
  created_at_height: number;
  paid_at_height: number | null;
  paid_period: string | null;
}

export interface BillList {
  bills: Bill[];
}

export interface TaxReport {
  seller: string;
  period: string;
  tax_collected: number;
  tax_remitted: number;
  discrepancy: number;
  bill_ids: number[];
}

export interface FlagEntry {
  seller: string;
  discrepancy: number;
}

export interface VerifyResult {
  ok: boolean;
  height?: number;
  violation?: { height: number; reason: string };
}

export interface LedgerEvent {
  seq: number;
  type: string;
  [field: string]: unknown;
}

export interface EventBatch {
  events: LedgerEvent[];
  next: number;
}

export interface PayResult {
  bill_id: number;
  payer: string;
  value: number;
  status: string;
}

export interface ErrorBody {
  error: string;
  detail: string;
}
