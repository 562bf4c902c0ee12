#!/usr/bin/env python3
import argparse
import csv
import os


def main():
    parser = argparse.ArgumentParser(description='Summarize kept/discarded cells and kept volume per enclosure step')
    parser.add_argument('--csv', default='analysis/cells.csv', help='Cells CSV written by "bundle-covering enclose --cells"')
    parser.add_argument('--out', default='analysis/cells_summary.csv', help='Output summary CSV')
    args = parser.parse_args()
    # Read cells
    summaries = {}
    with open(args.csv) as f:
        reader = csv.DictReader(f)
        for row in reader:
            step = int(row['step'])
            entry = summaries.setdefault(step, {'kept': 0, 'discarded': 0, 'volume': 0.0})
            entry[row['status']] += 1
            if row['status'] == 'kept':
                entry['volume'] += (
                    (float(row['theta_hi']) - float(row['theta_lo']))
                    * (float(row['x_hi']) - float(row['x_lo']))
                    * (float(row['y_hi']) - float(row['y_lo']))
                )
    # Write summary
    parent = os.path.dirname(args.out)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(args.out, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['step', 'kept', 'discarded', 'kept_volume'])
        for step in sorted(summaries):
            writer.writerow([step,
                             summaries[step]['kept'],
                             summaries[step]['discarded'],
                             repr(summaries[step]['volume'])])
    print(f"Wrote {args.out}")

if __name__ == '__main__':
    main()
