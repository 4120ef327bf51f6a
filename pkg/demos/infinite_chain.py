"""Energy density of the infinite ZPAF from a translation-invariant state.

The lambda MPS is infinite, so the cut between the upper and lower halves of
the chain has infinitely many Schmidt indices. Its environment is the fixed
point of the one-cell transfer operator. Raising chi (the MPS bond
dimension) shows how quickly the energy saturates. Takes about ten minutes
on one core.
"""

from schmidt_tns import (
    TrainConfig,
    build_hamiltonian,
    build_zpaf,
    infinite_energy,
    init_state,
    make_architecture,
    train,
)
from schmidt_tns.contraction import fixed_point

lat, bip = build_zpaf(1, "infinite")
H = build_hamiltonian(lat, "heisenberg")

for chi in (1, 3, 5):
    state = init_state(make_architecture(lat, bip, 1, chi=chi), seed=0)
    state, trace = train(state, H, TrainConfig(eta=1.0, max_steps=3000, tol=1e-10))
    env = fixed_point(state)
    rep = infinite_energy(state, H, env)
    print(f"chi = {chi}: E_b = {rep.E_b:.7f}  ({len(trace.E_b)} steps, "
          f"transfer eigenvalue {env.eigenvalue:.6f}, {trace.wall_time:.0f} s)")
