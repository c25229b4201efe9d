#!/usr/bin/env python3
"""Download and convert the four benchmark signed networks.

Produces, under --data-dir (default ./data):

  <name>.graph             directed largest connected component (statistics)
  <name>-undirected.graph  symmetrized largest connected component (benchmarks)

Sources (network access required; nothing in the test suite needs these):

  wikielec  https://snap.stanford.edu/data/wikiElec.ElecBs3.txt.gz
  wikirfa   https://snap.stanford.edu/data/wiki-RfA.txt.gz
  reddit    https://snap.stanford.edu/data/soc-redditHyperlinks-body.tsv
  twitter   referendum network from the POLE repository
            https://raw.githubusercontent.com/zexihuang/POLE/master/data/referendum.txt

Conversion: votes/links become integer-weighted directed records, repeated
(source, target) pairs are summed over time (zero sums drop), and the largest
connected component is kept. The undirected variant additionally sums the two
directions per pair before taking the component.
"""

import argparse
import gzip
import io
import sys
import urllib.request
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from sldm.graph import (  # noqa: E402
    EdgeRecord,
    aggregate_temporal,
    build_graph,
    degree_stats,
    largest_connected_component,
    symmetrize,
    write_graph,
)

URLS = {
    "wikielec": "https://snap.stanford.edu/data/wikiElec.ElecBs3.txt.gz",
    "wikirfa": "https://snap.stanford.edu/data/wiki-RfA.txt.gz",
    "reddit": "https://snap.stanford.edu/data/soc-redditHyperlinks-body.tsv",
    "twitter": "https://raw.githubusercontent.com/zexihuang/POLE/master/data/referendum.txt",
}


def _download(url, cache: Path):
    if cache.exists():
        return cache.read_bytes()
    print(f"downloading {url}")
    with urllib.request.urlopen(url) as resp:
        data = resp.read()
    cache.write_bytes(data)
    return data


def parse_wikielec(raw: bytes):
    """Vote records: V <vote> <voter_id> <time> <name>, target from the U line."""
    text = raw.decode("latin-1")
    records = []
    candidate = None
    for line in text.splitlines():
        parts = line.strip().split("\t")
        if not parts or not parts[0]:
            continue
        tag = parts[0]
        if tag == "U":
            candidate = parts[1]
        elif tag == "V" and candidate is not None:
            vote = int(parts[1])
            voter = parts[2]
            if voter != candidate:
                records.append(EdgeRecord(voter, candidate, vote))
    return records


def parse_wikirfa(raw: bytes):
    """SRC/TGT/VOT blocks; names may contain spaces, so index them."""
    text = raw.decode("utf-8", errors="replace")
    records = []
    names = {}

    def intern(name):
        if name not in names:
            names[name] = f"u{len(names)}"
        return names[name]

    src = tgt = vot = None
    for line in text.splitlines():
        if line.startswith("SRC:"):
            src = line[4:].strip()
        elif line.startswith("TGT:"):
            tgt = line[4:].strip()
        elif line.startswith("VOT:"):
            vot = int(line[4:].strip())
        elif not line.strip():
            if src and tgt and vot is not None and src != tgt:
                records.append(EdgeRecord(intern(src), intern(tgt), vot))
            src = tgt = vot = None
    if src and tgt and vot is not None and src != tgt:
        records.append(EdgeRecord(intern(src), intern(tgt), vot))
    return records


def parse_reddit(raw: bytes):
    text = raw.decode("utf-8", errors="replace")
    records = []
    for line in text.splitlines()[1:]:
        parts = line.split("\t")
        if len(parts) < 5:
            continue
        src, tgt, sentiment = parts[0], parts[1], int(parts[4])
        if src != tgt:
            records.append(EdgeRecord(src, tgt, sentiment))
    return records


def parse_twitter(raw: bytes):
    text = raw.decode("utf-8", errors="replace")
    records = []
    for line in text.splitlines():
        parts = line.replace(",", " ").split()
        if len(parts) < 3 or parts[0].startswith(("#", "%")):
            continue
        w = int(float(parts[2]))
        if w != 0 and parts[0] != parts[1]:
            records.append(EdgeRecord(parts[0], parts[1], w))
    return records


PARSERS = {
    "wikielec": parse_wikielec,
    "wikirfa": parse_wikirfa,
    "reddit": parse_reddit,
    "twitter": parse_twitter,
}


def convert(name, raw, data_dir: Path):
    records = PARSERS[name](raw)
    agg = aggregate_temporal(records)

    directed = largest_connected_component(build_graph(agg, directed=True))
    out = data_dir / f"{name}.graph"
    write_graph(out, directed)
    print(f"{out}: {degree_stats(directed)}")

    und = largest_connected_component(build_graph(symmetrize(agg), directed=False))
    out_u = data_dir / f"{name}-undirected.graph"
    write_graph(out_u, und)
    print(f"{out_u}: {degree_stats(und)}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", default=list(URLS),
                    help=f"datasets to fetch (default: all of {', '.join(URLS)})")
    ap.add_argument("--data-dir", default="data")
    args = ap.parse_args()
    data_dir = Path(args.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    cache_dir = data_dir / "raw"
    cache_dir.mkdir(exist_ok=True)
    for name in args.names or list(URLS):
        url = URLS[name]
        cache = cache_dir / url.rsplit("/", 1)[1]
        raw = _download(url, cache)
        if url.endswith(".gz"):
            raw = gzip.decompress(raw)
        convert(name, raw, data_dir)


if __name__ == "__main__":
    main()
