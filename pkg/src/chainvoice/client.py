"""Thin HTTP client for the service API; holds no ledger logic of its own."""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from urllib.parse import urlencode


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        super().__init__(f"{status} {code}: {detail}")
        self.status = status
        self.code = code
        self.detail = detail


class ConnectionFailed(Exception):
    pass


class ApiClient:
    def __init__(self, endpoint: str, api_key: str | None = None, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.api_key = api_key
        self.timeout = timeout

    def request(self, method: str, path: str, body: dict | None = None, query: dict | None = None):
        url = self.endpoint + path
        if query:
            url += "?" + urlencode({k: v for k, v in query.items() if v is not None})
        data = json.dumps(body).encode("utf-8") if body is not None else None
        req = urllib.request.Request(url, data=data, method=method)
        req.add_header("Content-Type", "application/json")
        if self.api_key:
            req.add_header("X-Api-Key", self.api_key)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            try:
                payload = json.loads(exc.read().decode("utf-8"))
                raise ApiError(
                    exc.code,
                    str(payload.get("error", "HttpError")),
                    str(payload.get("detail", "")),
                ) from None
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise ApiError(exc.code, "HttpError", exc.reason or "") from None
        except urllib.error.URLError as exc:
            raise ConnectionFailed(f"cannot reach {url}: {exc.reason}") from None

    # convenience wrappers -------------------------------------------------

    def register_account(self, account_id: str, role: str, initial_balance: int):
        return self.request(
            "POST",
            "/accounts",
            {"account_id": account_id, "role": role, "initial_balance": initial_balance},
        )

    def create_bill(self, payee: str, amount: int, tax_amount: int, memo: str):
        return self.request(
            "POST",
            "/bills",
            {"payee": payee, "amount": amount, "tax_amount": tax_amount, "memo": memo},
        )

    def pay_bill(self, bill_id: int, value: int):
        return self.request("POST", f"/bills/{bill_id}/pay", {"value": value})

    def remit(self, seller: str, amount: int, period: str):
        return self.request(
            "POST", "/remittances", {"seller": seller, "amount": amount, "period": period}
        )

    def file_document(self, kind: str, subject: str, payload: str):
        return self.request(
            "POST", "/documents", {"kind": kind, "subject": subject, "payload": payload}
        )

    def me(self):
        return self.request("GET", "/me")

    def account(self, account_id: str):
        return self.request("GET", f"/accounts/{account_id}")

    def bill(self, bill_id: int):
        return self.request("GET", f"/bills/{bill_id}")

    def bills(self, payee: str | None = None, status: str | None = None):
        return self.request("GET", "/bills", query={"payee": payee, "status": status})

    def chain(self):
        return self.request("GET", "/chain")

    def verify(self):
        return self.request("GET", "/chain/verify")

    def tax_report(self, seller: str, period: str):
        return self.request("GET", "/reports/tax", query={"seller": seller, "period": period})

    def flags(self, period: str):
        return self.request("GET", "/flags", query={"period": period})

    def events(self, since: int = 0):
        return self.request("GET", "/events", query={"since": since})

    def view(self):
        return self.request("GET", "/view")
