"""Decode PBM QR symbols with zxing-cpp, one JSON string per line.

An empty string means the symbol was not found or failed to decode.
"""
import json
import sys

import zxingcpp
from PIL import Image


def decode(path: str, scale: int = 6) -> str:
    img = Image.open(path).convert("L")
    img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    found = zxingcpp.read_barcodes(img, formats=zxingcpp.BarcodeFormat.QRCode)
    return found[0].text if len(found) == 1 else ""


def main() -> None:
    for path in sys.argv[1:]:
        print(json.dumps(decode(path)))


if __name__ == "__main__":
    main()
