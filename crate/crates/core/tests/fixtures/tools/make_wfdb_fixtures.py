#!/usr/bin/env python3
"""Build the synthetic WFDB record set and its reference dumps.

The records are simulated ECG (ECGSYN via neurokit2) written in MIT-BIH
layout by wfdb-python: two channels (MLII, V5) in format 212 at 360 Hz,
gain 200/mV, baseline 1024, plus an .atr annotation file. Beat annotations
come from the clean signal; the stored signal carries baseline wander,
mains hum and white noise. Record syn103 contains a 4 s lead-off dropout so
that its annotation file needs a SKIP pseudo-annotation.

Dumps are produced by reading the files back with wfdb-python (header
fields, first 1000 raw samples per channel, beat times) and by running the
py-ecg-detectors reference detectors on channel 0.

    pip install wfdb neurokit2 py-ecg-detectors
    python3 make_wfdb_fixtures.py
"""
import json
import os

import neurokit2 as nk
import numpy as np
import wfdb
from ecgdetectors import Detectors

HERE = os.path.dirname(os.path.abspath(__file__))
REC_DIR = os.path.join(HERE, "..", "wfdb")
DUMP_DIR = os.path.join(HERE, "..", "wfdb_reference")
FS = 360
DURATION = 180
RATES = [60, 72, 85, 95, 110, 55, 78, 66, 100, 90]
BEAT_CODES = set(range(1, 14)) | {25} | set(range(34, 39))


def simulate(idx, hr):
    seed = 1000 + idx
    rng = np.random.default_rng(seed)
    clean = nk.ecg_simulate(duration=DURATION, sampling_rate=FS, heart_rate=hr,
                            heart_rate_std=2 + idx % 4, method="ecgsyn",
                            random_state=seed)
    _, info = nk.ecg_peaks(clean, sampling_rate=FS)
    peaks = np.asarray(info["ECG_R_Peaks"], dtype=int)
    t = np.arange(clean.size) / FS
    wander = 0.12 * np.sin(2 * np.pi * (0.12 + 0.03 * idx) * t + idx)
    hum = 0.01 * np.sin(2 * np.pi * 60.0 * t)
    noise = rng.normal(scale=0.012 + 0.004 * (idx % 3), size=clean.size)
    lead1 = clean + wander + hum + noise
    lead2 = 0.6 * np.roll(clean, 4) - 0.15 * clean + 0.5 * wander + rng.normal(scale=0.015, size=clean.size)
    dropout = None
    if idx == 3:
        start, stop = 60 * FS, 64 * FS
        lead1[start:stop] = 0.0
        lead2[start:stop] = 0.0
        dropout = (start, stop)
        peaks = peaks[(peaks < start) | (peaks >= stop)]
    return np.column_stack([lead1, lead2]), peaks, dropout, rng


def annotate(peaks, dropout, rng):
    samples, symbols, aux, subtype, chan, num = [], [], [], [], [], []

    def add(s, sym, a="", sub=0, ch=0, n=0):
        samples.append(int(s))
        symbols.append(sym)
        aux.append(a)
        subtype.append(sub)
        chan.append(ch)
        num.append(n)

    add(18, "+", "(N")
    for k, p in enumerate(peaks):
        r = rng.random()
        sym = "V" if r < 0.02 else ("A" if r < 0.04 else "N")
        add(p, sym)
        if k == 40:
            add(p + 40, "~", sub=1, ch=1)
        if k == 80:
            add(p + 30, "|", n=2)
    if dropout is not None:
        add(dropout[0] + 2, "~", sub=-1)
    order = np.argsort(samples, kind="stable")
    pick = lambda xs: [xs[i] for i in order]
    return (np.array(pick(samples)), pick(symbols), pick(aux),
            np.array(pick(subtype)), np.array(pick(chan)), np.array(pick(num)))


def write_record(name, sig, ann):
    wfdb.wrsamp(name, fs=FS, units=["mV", "mV"], sig_name=["MLII", "V5"],
                p_signal=sig, fmt=["212", "212"], adc_gain=[200.0, 200.0],
                baseline=[1024, 1024], write_dir=REC_DIR)
    samples, symbols, aux, subtype, chan, num = ann
    wfdb.wrann(name, "atr", sample=samples, symbol=symbols, aux_note=aux,
               subtype=subtype, chan=chan, num=num, write_dir=REC_DIR)


def reference_dump(name, rec_dir=REC_DIR):
    path = os.path.join(rec_dir, name)
    hdr = wfdb.rdheader(path)
    rec = wfdb.rdrecord(path, physical=False)
    ann = wfdb.rdann(path, "atr", return_label_elements=["label_store", "symbol"])
    beats = [int(s) for s, c in zip(ann.sample, ann.label_store) if int(c) in BEAT_CODES]
    fs = int(hdr.fs)
    det = Detectors(fs)
    ecg = rec.d_signal[:, 0].astype(float)
    ecg = (ecg - hdr.baseline[0]) / hdr.adc_gain[0]
    ds = ecg[:: fs // 72]
    det72 = Detectors(72)
    counts = {}
    for key, fn, fn72 in [
        ("pan_tompkins", det.pan_tompkins_detector, det72.pan_tompkins_detector),
        ("hamilton", det.hamilton_detector, det72.hamilton_detector),
        ("christov", det.christov_detector, det72.christov_detector),
        ("tma", det.two_average_detector, det72.two_average_detector),
        ("swt", det.swt_detector, det72.swt_detector),
    ]:
        counts[key] = {"fs360": len(fn(ecg)), "fs72": len(fn72(ds))}
    return {
        "record": name,
        "header": {
            "record_name": hdr.record_name,
            "n_signals": hdr.n_sig,
            "sample_rate": hdr.fs,
            "n_samples": hdr.sig_len,
            "signals": [
                {"file_name": f, "storage_format": int(fmt), "adc_gain": g,
                 "adc_zero": z, "baseline": b, "initial_value": iv,
                 "checksum": cs, "description": d}
                for f, fmt, g, z, b, iv, cs, d in zip(
                    hdr.file_name, hdr.fmt, hdr.adc_gain, hdr.adc_zero,
                    hdr.baseline, hdr.init_value, hdr.checksum, hdr.sig_name)
            ],
        },
        "samples_read": int(rec.d_signal.shape[0]),
        "first_samples": [rec.d_signal[:1000, c].astype(int).tolist() for c in range(rec.n_sig)],
        "annotation_count": int(len(ann.sample)),
        "beats": beats,
        "reference_detector_counts": counts,
    }


def main():
    os.makedirs(REC_DIR, exist_ok=True)
    os.makedirs(DUMP_DIR, exist_ok=True)
    names = []
    for idx, hr in enumerate(RATES):
        name = f"syn1{idx:02d}"
        sig, peaks, dropout, rng = simulate(idx, hr)
        write_record(name, sig, annotate(peaks, dropout, rng))
        with open(os.path.join(DUMP_DIR, name + ".json"), "w") as f:
            json.dump(reference_dump(name), f)
            f.write("\n")
        names.append(name)
    with open(os.path.join(REC_DIR, "RECORDS"), "w") as f:
        f.write("\n".join(names) + "\n")


if __name__ == "__main__":
    main()
