/** Client-side invoice form validation, mirroring the contract's own
 * preconditions so obviously-invalid submissions never leave the browser.
 * The server re-checks everything regardless. */

export interface InvoiceForm {
  payee: string;
  amount: number;
  taxAmount: number;
  memo: string;
}

export const MAX_MEMO_BYTES = 256;

export function memoByteLength(memo: string): number {
  return new TextEncoder().encode(memo).length;
}

export function invoiceFormErrors(form: InvoiceForm): string[] {
  const errors: string[] = [];
  if (!Number.isInteger(form.amount) || form.amount <= 0) {
    errors.push("amount must be a positive integer of minor units");
  }
  if (!Number.isInteger(form.taxAmount) || form.taxAmount < 0) {
    errors.push("tax must be a non-negative integer of minor units");
  } else if (Number.isInteger(form.amount) && form.taxAmount > form.amount) {
    errors.push("tax cannot exceed the amount");
  }
  if (memoByteLength(form.memo) > MAX_MEMO_BYTES) {
    errors.push(`memo exceeds ${MAX_MEMO_BYTES} bytes`);
  }
  return errors;
}

export function canSubmitInvoice(form: InvoiceForm): boolean {
  return invoiceFormErrors(form).length === 0;
}
