#!/usr/bin/env python3
"""Freeze numeric oracle values from established reference libraries.

Run once from this directory; writes ../oracles/*.json. The Rust tests only
read the JSON, so scipy/pywt/sacrebleu are not needed at test time.

    pip install scipy pywavelets sacrebleu
    python3 make_oracles.py
"""
import json
import os

import numpy as np
import pywt
import sacrebleu
from scipy import signal

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "oracles")
os.makedirs(OUT, exist_ok=True)


def dump(name, obj):
    with open(os.path.join(OUT, name), "w") as f:
        json.dump(obj, f, indent=1)
        f.write("\n")


def butter_cases():
    rng = np.random.default_rng(7)
    x = rng.normal(size=200).round(3)
    cases = []
    for order, low, high, fs in [
        (1, 5.0, 15.0, 72.0),
        (1, 5.0, 15.0, 360.0),
        (1, 8.0, 16.0, 72.0),
        (1, 8.0, 16.0, 360.0),
        (2, 8.0, 20.0, 72.0),
        (2, 8.0, 20.0, 360.0),
    ]:
        b, a = signal.butter(order, [low / (fs / 2), high / (fs / 2)], btype="bandpass")
        y = signal.lfilter(b, a, x)
        cases.append({"kind": "bandpass", "order": order, "low": low, "high": high, "fs": fs,
                      "b": b.tolist(), "a": a.tolist(), "y": y.tolist()})
    for order, cut, fs in [(2, 3.0, 100.0), (2, 3.0, 200.0)]:
        b, a = signal.butter(order, cut / (fs / 2), btype="low")
        y = signal.lfilter(b, a, x)
        cases.append({"kind": "lowpass", "order": order, "low": cut, "high": cut, "fs": fs,
                      "b": b.tolist(), "a": a.tolist(), "y": y.tolist()})
    dump("butter.json", {"x": x.tolist(), "cases": cases})


def swt_cases():
    rng = np.random.default_rng(11)
    out = []
    for n in [64, 200]:
        x = rng.normal(size=n).round(4)
        pad = (-n) % 8
        xp = np.pad(x, (0, pad), "edge") if pad else x
        c = pywt.swt(xp, "db3", level=3)
        out.append({"x": x.tolist(), "padded_len": len(xp),
                    "detail3": c[0][1].tolist(), "approx3": c[0][0].tolist(),
                    "detail1": c[2][1].tolist()})
    dump("swt_db3.json", {"cases": out})


def peaks_cases():
    rng = np.random.default_rng(3)
    t = np.arange(1000) / 100.0
    x = 2.0 * np.sin(2 * np.pi * 1.7 * t) + rng.normal(scale=0.8, size=t.size)
    x = x.round(4)
    out = []
    for prom, dist in [(1.5, 30), (0.5, 1), (3.0, 10)]:
        p, _ = signal.find_peaks(x, prominence=prom, distance=dist)
        out.append({"prominence": prom, "distance": dist, "peaks": p.tolist()})
    dump("find_peaks.json", {"x": x.tolist(), "cases": out})


PAIRS = [
    ("The user is inside a shopping mall near a Starbucks.",
     "The user is in a shopping mall close to a Starbucks cafe."),
    ("The user is stationary, likely in an outdoor area near a McDonald restaurant in Singapore.",
     "Outdoor seating area next to a McDonald's restaurant in Singapore."),
    ("Likely on a university campus, close to the library building.",
     "Walking across the university campus near the main library."),
    ("The user appears to be in a subway station.",
     "Inside a metro station concourse."),
    ("The user is walking along a street with several cafes.",
     "Outdoors on a shopping street lined with cafes and shops."),
    ("Possibly in an office building with corporate WiFi networks.",
     "Office floor of a commercial building."),
    ("The user is at home.",
     "Residential apartment, living room."),
    ("Near a hotel lobby, SSIDs suggest a Marriott hotel.",
     "Lobby of the Marriott hotel."),
    ("Inside   an airport\tterminal near gate 12.",
     "Airport terminal, departure gate area."),
    ("The user is likely in a hospital waiting area.",
     "Waiting room of a public hospital."),
]


def chrf_cases():
    ws = sacrebleu.metrics.CHRF(char_order=6, word_order=0, beta=2, whitespace=True)
    nows = sacrebleu.metrics.CHRF(char_order=6, word_order=0, beta=2, whitespace=False)
    out = []
    for hyp, ref in PAIRS:
        nh, nr = " ".join(hyp.split()), " ".join(ref.split())
        out.append({
            "hypothesis": hyp,
            "reference": ref,
            "chrf_whitespace": ws.sentence_score(nh, [nr]).score / 100.0,
            "chrf_no_whitespace": nows.sentence_score(hyp, [ref]).score / 100.0,
            "chrf_reversed_whitespace": ws.sentence_score(nr, [nh]).score / 100.0,
        })
    dump("chrf.json", {"sacrebleu_version": sacrebleu.__version__, "char_order": 6,
                       "beta": 2, "pairs": out})


if __name__ == "__main__":
    butter_cases()
    swt_cases()
    peaks_cases()
    chrf_cases()
