"""One loudspeaker cannot invert its own response with an FIR filter; two
loudspeakers without common zeros can, exactly, once the filters are long
enough. This script shows the residual collapsing when the second channel
comes in."""

import math

import numpy as np

from eqdesign.design import DesignConfig, design_filter, reduce_to_rtf, solve_regularized
from eqdesign.evaluation import evaluate
from eqdesign.scenario import SynthSpec, forward_path_ir, select_loudspeakers, synth_scenario

RATE = 16000.0

spec = SynthSpec(
    num_sets=1, num_loudspeakers=2, source_ir_length=12, speaker_ir_length=8,
    phase_family="co-prime-pair", leakage_attenuation_db=math.inf,
    reinsertion_level_db=None, correlation=1.0,
)
scene = synth_scenario(spec, seed=3)
g = forward_path_ir(0.0, 0, RATE)

print("speakers  filter_taps  relative_residual")
for n_spk in (1, 2):
    sub = select_loudspeakers(scene, n_spk)
    for taps in (4, 7, 12):
        system = reduce_to_rtf(sub.sets[0], g, taps, 0)
        filt = solve_regularized(system, 1e-12)
        a = filt.coefficients.ravel()
        rel = np.linalg.norm(system.matrix @ a - system.target) / np.linalg.norm(system.target)
        print(f"{n_spk:8d}  {taps:11d}  {rel:.3e}")

config = DesignConfig(variant="R_DELTA_LS", filter_length=7, acausal_delay=0, reg_lambda=1e-12)
filt = design_filter(scene, g, config)
report = evaluate(scene, g, filt, config)
print(f"\ntwo-speaker design, 7 taps each: auditory distance "
      f"{report.delta_h_aud_db[0]:.2e} dB")
