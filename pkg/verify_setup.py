import sys
from pathlib import Path

# Adding the project root to Python path
current_dir = Path(__file__).parent
sys.path.append(str(current_dir))

from dotenv import load_dotenv

from app.config import CATALOG_FILE, MASKS_DIR, validate_config
from app.coding.css import make_key_map, verify_css
from app.services.catalog_service import CatalogService


def verify_setup() -> bool:
    load_dotenv()

    print("\n1. Checking configuration...")
    try:
        validate_config()
    except ValueError as e:
        print(f"❌ {e}")
        return False
    print("✓ Environment settings are valid")

    print("\n2. Checking the code catalog and masks...")
    if not CATALOG_FILE.exists():
        print(f"❌ Catalog not found at {CATALOG_FILE}")
        return False
    catalog = CatalogService()
    for code_id in catalog.code_ids(["appendix"]):
        entry = catalog.entry(code_id)
        if not catalog.mask_checksum_ok(entry):
            print(f"❌ Mask {entry.mask_id} under {MASKS_DIR} does not match its checksum")
            return False
    print(f"✓ {len(catalog.entries)} catalog entries, all appendix masks intact")

    print("\n3. Building a toy CSS pair...")
    try:
        pair = catalog.build_pair("toy-5-2-3")
        report = verify_css(pair)
        keymap = make_key_map(pair)
        print(f"✓ {report.summary()}")
        print(f"✓ key length {keymap.key_len}")
        return report.passed
    except Exception as e:
        print(f"\n❌ Error building the toy pair: {str(e)}")
        import traceback
        print(traceback.format_exc())
        return False


if __name__ == "__main__":
    print("Starting verification...")
    print(f"Project root: {current_dir}")
    sys.exit(0 if verify_setup() else 1)
