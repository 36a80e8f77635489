"""
Test suite for the CSS-LDPC key reconciliation simulator.

Domain tests live next to each other per area; services and utilities have
their own files.
"""

import os
from dotenv import load_dotenv

# Load environment variables for testing
load_dotenv()

# Setup test constants
TEST_DATA_DIR = os.path.join(os.path.dirname(__file__), 'test_data')
