"""Configuration sweeps for the static, shifted and interleaved families."""

from rcjrp.verify import sweep_interleaved, sweep_shifted, sweep_static

for sweep in (sweep_static, sweep_shifted, sweep_interleaved):
    s = sweep().summary()
    print(f"{s['family']:>12}: {s['configs']:>6} configs, min {s['value']:.10f} at {s['argmin']}, ok={s['ok']}")
