"""How many charge carriers does an overnight run resolve?

One electron-hole pair contributes SNR sqrt(n) / 1e6 after n accumulated
transients. Eight hours at one shot every 300 us gives n = 9.6e7.

    python demos/sensitivity.py
"""

from spinpair.synth import detection_limit, shots_in, snr_per_pair

shots = shots_in(8 * 3600, 300e-6)
print(f"accumulated transients: {shots:.3g}")
print(f"SNR per pair:           {snr_per_pair(shots):.4f}")
for snr in (1, 3, 10):
    print(f"pairs needed for SNR {snr:>2}: {detection_limit(shots, snr):7.0f}")
