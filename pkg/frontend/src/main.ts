/** Browser entry point: login, role routing, screen wiring, event polling. */

import { ApiError } from "./api.js";
import { EventPoller } from "./events.js";
import { flagTable, invoiceCard, paidRow, payableRow, reportPanel, verifyBadge } from "./render.js";
import { createSession, loadConfig, screensFor, type SessionContext } from "./session.js";
import {
  loadAuditorModel,
  loadCustomerModel,
  loadShopkeeperModel,
  reportView,
} from "./stores.js";
import { canSubmitInvoice, invoiceFormErrors, type InvoiceForm } from "./validate.js";

const app = () => document.getElementById("app")!;

function currentPeriod(): string {
  const now = new Date();
  return `${now.getUTCFullYear()}-${String(now.getUTCMonth() + 1).padStart(2, "0")}`;
}

function showError(target: HTMLElement, error: unknown): void {
  const text =
    error instanceof ApiError ? `${error.code}: ${error.detail}` : String(error);
  const box = target.querySelector(".error") ?? target.appendChild(document.createElement("p"));
  box.className = "error";
  box.textContent = text;
}

// --- login -------------------------------------------------------------------

async function renderLogin(): Promise<void> {
  const config = await loadConfig();
  app().innerHTML = `
    <section class="card login">
      <h2>Sign in</h2>
      <label>service URL <input id="endpoint" value="${config.endpoint}" placeholder="same origin"></label>
      <label>API key <input id="apikey" type="password" autocomplete="off"></label>
      <button id="login">Connect</button>
    </section>`;
  document.getElementById("login")!.addEventListener("click", async () => {
    const endpoint = (document.getElementById("endpoint") as HTMLInputElement).value.trim();
    const key = (document.getElementById("apikey") as HTMLInputElement).value.trim();
    try {
      const session = await createSession(endpoint, key);
      renderShell(session);
    } catch (error) {
      showError(app(), error);
    }
  });
}

// --- shell -------------------------------------------------------------------

function renderShell(session: SessionContext): void {
  const screens = screensFor(session.role);
  app().innerHTML = `
    <header class="topbar">
      <strong>chainvoice</strong>
      <span>${session.accountId} (${session.role})</span>
      <span id="wallet"></span>
      <button id="logout">sign out</button>
    </header>
    <main id="screen"></main>`;
  document.getElementById("logout")!.addEventListener("click", () => {
    window.location.reload();
  });
  if (!session.registered) {
    document.getElementById("screen")!.innerHTML =
      `<p class="error">This key's account is not registered on the ledger yet.</p>`;
    return;
  }
  if (screens.includes("invoices")) void shopkeeperScreen(session);
  else if (screens.includes("wallet")) void customerScreen(session);
  else void auditorScreen(session);
}

// --- shopkeeper ----------------------------------------------------------------

async function shopkeeperScreen(session: SessionContext): Promise<void> {
  const screen = document.getElementById("screen")!;
  screen.innerHTML = `
    <section class="card">
      <h2>New invoice</h2>
      <form id="invoice-form">
        <label>amount (minor units) <input name="amount" type="number" min="1" step="1"></label>
        <label>tax (minor units) <input name="tax" type="number" min="0" step="1"></label>
        <label>memo <input name="memo" maxlength="256"></label>
        <button id="create" type="submit" disabled>Create bill</button>
      </form>
      <p class="hint" id="form-errors"></p>
    </section>
    <section id="bill-cards"></section>`;

  const form = document.getElementById("invoice-form") as HTMLFormElement;
  const submit = document.getElementById("create") as HTMLButtonElement;

  const readForm = (): InvoiceForm => ({
    payee: session.accountId,
    amount: Number((form.elements.namedItem("amount") as HTMLInputElement).value),
    taxAmount: Number((form.elements.namedItem("tax") as HTMLInputElement).value || "0"),
    memo: (form.elements.namedItem("memo") as HTMLInputElement).value,
  });

  form.addEventListener("input", () => {
    const current = readForm();
    submit.disabled = !canSubmitInvoice(current);
    document.getElementById("form-errors")!.textContent = invoiceFormErrors(current).join("; ");
  });

  const refresh = async () => {
    const model = await loadShopkeeperModel(session.client, session.accountId);
    document.getElementById("bill-cards")!.innerHTML = model.bills
      .slice()
      .reverse()
      .map(invoiceCard)
      .join("");
  };

  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const current = readForm();
    if (!canSubmitInvoice(current)) return; // mirror: invalid forms never send
    try {
      await session.client.createBill(current.payee, current.amount, current.taxAmount, current.memo);
      form.reset();
      submit.disabled = true;
      await refresh();
    } catch (error) {
      showError(screen, error);
    }
  });

  await refresh();
  new EventPoller(session.client, (events) => {
    if (events.some((e) => e.type === "BillPaid" || e.type === "BillCreated")) void refresh();
  }).start();
}

// --- customer --------------------------------------------------------------------

async function customerScreen(session: SessionContext): Promise<void> {
  const screen = document.getElementById("screen")!;
  const refresh = async () => {
    const model = await loadCustomerModel(session.client, session.accountId);
    document.getElementById("wallet")!.innerHTML =
      `balance <span class="amount" data-minor-units="${model.balance.raw}">${model.balance.display}</span>`;
    screen.innerHTML = `
      <section class="card">
        <h2>Payable bills</h2>
        <table><thead><tr><th>id</th><th>payee</th><th>memo</th><th>amount</th><th></th></tr></thead>
        <tbody>${model.payable.map(payableRow).join("")}</tbody></table>
      </section>
      <section class="card">
        <h2>Paid by you</h2>
        <table><thead><tr><th>id</th><th>payee</th><th>amount</th><th>tax</th><th>period</th><th>tax status</th></tr></thead>
        <tbody>${model.paid.map(paidRow).join("")}</tbody></table>
      </section>`;
    for (const button of screen.querySelectorAll<HTMLButtonElement>("button.pay")) {
      button.addEventListener("click", async () => {
        try {
          // value comes straight from the bill's amount field; the server
          // enforces equality regardless
          await session.client.payBill(
            Number(button.dataset.billId),
            Number(button.dataset.value),
          );
          await refresh();
        } catch (error) {
          showError(screen, error);
        }
      });
    }
  };
  await refresh();
  new EventPoller(session.client, () => void refresh()).start();
}

// --- auditor ---------------------------------------------------------------------

async function auditorScreen(session: SessionContext): Promise<void> {
  const screen = document.getElementById("screen")!;
  screen.innerHTML = `
    <section class="card">
      <h2>Evasion flags</h2>
      <label>period <input id="period" value="${currentPeriod()}" pattern="\\d{4}-\\d{2}"></label>
      <button id="load-flags">Load</button>
      <button id="verify">Verify chain</button>
      <span id="verify-result"></span>
      <div id="flag-table"></div>
    </section>
    <div id="report-panel"></div>`;

  const loadFlags = async () => {
    const period = (document.getElementById("period") as HTMLInputElement).value;
    try {
      const model = await loadAuditorModel(session.client, period);
      document.getElementById("flag-table")!.innerHTML = flagTable(model.flags);
      for (const link of screen.querySelectorAll<HTMLAnchorElement>("a.drill")) {
        link.addEventListener("click", async (event) => {
          event.preventDefault();
          const report = await session.client.taxReport(link.dataset.seller!, period);
          document.getElementById("report-panel")!.innerHTML = reportPanel(reportView(report));
        });
      }
    } catch (error) {
      showError(screen, error);
    }
  };

  document.getElementById("load-flags")!.addEventListener("click", () => void loadFlags());
  document.getElementById("verify")!.addEventListener("click", async () => {
    const result = await session.client.verify();
    document.getElementById("verify-result")!.innerHTML = verifyBadge(result);
  });
  await loadFlags();
}

void renderLogin();
