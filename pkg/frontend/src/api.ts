/** Typed fetch client for the service API. Every request carries the session
 * key in X-Api-Key; errors surface as ApiError with the server's code. */

import type {
  Account,
  Bill,
  BillList,
  ErrorBody,
  EventBatch,
  FlagEntry,
  Me,
  PayResult,
  TaxReport,
  VerifyResult,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`${status} ${code}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    private readonly endpoint: string,
    private readonly apiKey: string,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.endpoint + path, {
      method,
      headers: {
        "X-Api-Key": this.apiKey,
        ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
      },
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = (await response.json()) as T | ErrorBody;
    if (!response.ok) {
      const err = payload as ErrorBody;
      throw new ApiError(response.status, err.error ?? "HttpError", err.detail ?? "");
    }
    return payload as T;
  }

  me(): Promise<Me> {
    return this.request("GET", "/me");
  }

  account(accountId: string): Promise<Account> {
    return this.request("GET", `/accounts/${encodeURIComponent(accountId)}`);
  }

  bill(billId: number): Promise<Bill> {
    return this.request("GET", `/bills/${billId}`);
  }

  bills(filter: { payee?: string; status?: "unpaid" | "paid" } = {}): Promise<BillList> {
    const query = new URLSearchParams();
    if (filter.payee !== undefined) query.set("payee", filter.payee);
    if (filter.status !== undefined) query.set("status", filter.status);
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.request("GET", `/bills${suffix}`);
  }

  createBill(payee: string, amount: number, taxAmount: number, memo: string): Promise<{ bill_id: number }> {
    return this.request("POST", "/bills", {
      payee,
      amount,
      tax_amount: taxAmount,
      memo,
    });
  }

  payBill(billId: number, value: number): Promise<PayResult> {
    return this.request("POST", `/bills/${billId}/pay`, { value });
  }

  remit(seller: string, amount: number, period: string): Promise<unknown> {
    return this.request("POST", "/remittances", { seller, amount, period });
  }

  fileDocument(kind: string, subject: string, payload: string): Promise<unknown> {
    return this.request("POST", "/documents", { kind, subject, payload });
  }

  taxReport(seller: string, period: string): Promise<TaxReport> {
    const query = new URLSearchParams({ seller, period });
    return this.request("GET", `/reports/tax?${query.toString()}`);
  }

  flags(period: string): Promise<FlagEntry[]> {
    const query = new URLSearchParams({ period });
    return this.request("GET", `/flags?${query.toString()}`);
  }

  verify(): Promise<VerifyResult> {
    return this.request("GET", "/chain/verify");
  }

  events(since: number): Promise<EventBatch> {
    return this.request("GET", `/events?since=${since}`);
  }
}
