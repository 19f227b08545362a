#!/usr/bin/env python3
"""End-to-end walkthrough against a throwaway local service.

Boots a service on a temp directory, then drives the full story: a shopkeeper
invoices a sale, the customer pays it, the shopkeeper under-remits, and the
tax authority sees the discrepancy and files a show-cause notice. Finishes
with a chain verification.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from chainvoice.client import ApiClient
from chainvoice.cli import main as cli
from chainvoice.service import ServiceConfig, ServiceRuntime, load_keys


def wait_for_seal(client: ApiClient, seller: str, period: str, want_collected: int) -> dict:
    for _ in range(100):
        try:
            report = client.tax_report(seller, period)
            if report["tax_collected"] >= want_collected:
                return report
        except Exception:
            pass
        time.sleep(0.2)
    raise RuntimeError("service never sealed the pending transactions")


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = Path(tmp) / "data"
        cli(
            [
                "init",
                "--data-dir", str(data_dir),
                "--account", "teashop:shopkeeper:0",
                "--account", "asha:customer:250000",
                "--account", "taxdept:central_tax_authority:0",
            ]
        )
        keys = {r["account_id"]: r["key"] for r in json.loads((data_dir / "keys.json").read_text())}
        config = ServiceConfig(port=0, data_dir=str(data_dir), block_interval=1)
        runtime = ServiceRuntime(config, load_keys(str(data_dir / "keys.json")))
        runtime.start()
        host, port = runtime.address
        endpoint = f"http://{host}:{port}"
        period = time.strftime("%Y-%m", time.gmtime())
        print(f"service on {endpoint}, period {period}\n")

        shop = ApiClient(endpoint, keys["teashop"])
        asha = ApiClient(endpoint, keys["asha"])
        tax = ApiClient(endpoint, keys["taxdept"])

        bill = shop.create_bill("teashop", 120_00, 21_60, "assam tea, 1kg")
        print(f"shopkeeper created bill #{bill['bill_id']}")
        print("  customer sees:", asha.bill(bill["bill_id"]))

        asha.pay_bill(bill["bill_id"], 120_00)
        print(f"customer paid bill #{bill['bill_id']}; balance:", asha.me()["balance"])

        shop.remit("teashop", 10_00, period)
        report = wait_for_seal(tax, "teashop", period, want_collected=21_60)
        print("\ntax authority report:", report)
        flags = tax.flags(period)
        print("evasion flags:", flags)
        if flags:
            tax.file_document("show_cause_notice", flags[0]["seller"], "explain the gap")
            print(f"show-cause notice filed against {flags[0]['seller']}")

        print("\nchain verify:", tax.verify())
        runtime.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
