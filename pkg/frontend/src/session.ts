/** Session bootstrap: resolve an API key to its account and role via /me,
 * which also decides the screens this session may render. */

import { ApiClient } from "./api.js";
import type { Me, Role } from "./types.js";

export interface SessionContext {
  endpoint: string;
  client: ApiClient;
  accountId: string;
  role: Role;
  registered: boolean;
}

export interface ConsoleConfig {
  endpoint: string;
}

export async function loadConfig(baseUrl = ""): Promise<ConsoleConfig> {
  try {
    const response = await fetch(`${baseUrl}/config.json`);
    if (response.ok) {
      const cfg = (await response.json()) as Partial<ConsoleConfig>;
      return { endpoint: cfg.endpoint ?? "" };
    }
  } catch {
    // fall through to same-origin default
  }
  return { endpoint: "" };
}

export async function createSession(endpoint: string, apiKey: string): Promise<SessionContext> {
  const client = new ApiClient(endpoint, apiKey);
  const me: Me = await client.me();
  return {
    endpoint,
    client,
    accountId: me.account_id,
    role: me.role,
    registered: me.registered,
  };
}

/** Screens a role may navigate to; mirrors the server-side view policy. */
export function screensFor(role: Role): string[] {
  switch (role) {
    case "shopkeeper":
      return ["invoices"];
    case "customer":
      return ["wallet"];
    case "state_tax_authority":
    case "central_tax_authority":
      return ["audit"];
    case "other_authority":
      return ["documents"];
  }
}
