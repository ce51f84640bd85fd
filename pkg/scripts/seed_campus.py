#!/usr/bin/env python3
"""
Seed script for wlantrace - writes a small synthetic campus into ./data
"""

import os
import sys

from dotenv import load_dotenv

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from wlantrace.core.models import CampusSpec, SpreaderProfile
from wlantrace.services.synth_service import generate, planted_ids


def main():
    load_dotenv()

    data_dir = os.path.join(os.getcwd(), 'data')
    os.makedirs(data_dir, exist_ok=True)

    spec = CampusSpec(
        n_students=int(os.getenv('SEED_STUDENTS', '400')),
        weeks=int(os.getenv('SEED_WEEKS', '2')),
        seed=int(os.getenv('SEED_CAMPUS_SEED', '7')),
    )

    print("🌱 Seeding demo campus...")
    campus = generate(spec, os.path.join(data_dir, 'campus.log'), os.path.join(data_dir, 'manifest.json'))
    print(f"✅ Wrote {len(campus.lines)} log lines for {spec.n_students} students")
    print(f"   hub spreaders: {', '.join(planted_ids(campus.manifest, SpreaderProfile.HUB))}")
    print(f"   environmental spreaders: {', '.join(planted_ids(campus.manifest, SpreaderProfile.ENVIRONMENTAL))}")
    print()
    print("Run the full pipeline with:")
    print("  python app.py --out out pipeline --log data/campus.log "
          "--ap-dir data/ap_directory.csv --walk data/walk_matrix.csv")


if __name__ == '__main__':
    main()
