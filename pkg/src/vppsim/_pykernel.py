"""Pure-Python lane of the hot simulation kernels.

Two inner loops dominate runtime: the per-step adaptive power evaluation
(run 35k times per episode) and the uncontrolled-charging year rollout
(run once per episode reset to produce the comparison baseline). Both have
a compiled twin in ``_speedups.pyx``; the arithmetic here is kept in the
exact same order so the two lanes produce bit-identical floats.
"""

IDLE = 0
CHARGE = 1
DISCHARGE = 2


def step_core(
    actions,
    energies,
    occupied,
    house_rw,
    min_power,
    rated_power,
    max_power,
    dt,
    energy_floor,
    energy_ceiling,
    force_charge_below,
    no_discharge_below,
    powers_out,
    applied_out,
):
    """Substitute invalid actions, allocate adaptive powers, update energies.

    Stations are visited in ascending index order; each sees the residual
    load left over after the stations before it. ``energies`` and the two
    output arrays are written in place. Returns (ev_power, total_load).
    """
    n = len(actions)
    residual = house_rw
    ev_power = 0.0
    for i in range(n):
        a = actions[i]
        if not occupied[i]:
            a = IDLE
        else:
            e = energies[i]
            if e < force_charge_below:
                a = CHARGE
            elif a == DISCHARGE and e < no_discharge_below:
                a = IDLE
            elif a == CHARGE and e >= energy_ceiling:
                a = IDLE
        applied_out[i] = a

        p = 0.0
        if a == CHARGE:
            if residual < 0.0:
                p = -residual
                if p < min_power:
                    p = min_power
                elif p > max_power:
                    p = max_power
            else:
                p = rated_power
            headroom = (energy_ceiling - energies[i]) / dt
            if p > headroom:
                p = headroom
        elif a == DISCHARGE:
            if residual > 0.0:
                p = residual
                if p < min_power:
                    p = min_power
                elif p > max_power:
                    p = max_power
                p = -p
            else:
                p = -rated_power
            drainable = (energies[i] - energy_floor) / dt
            if -p > drainable:
                p = -drainable
        if a != IDLE:
            energies[i] = energies[i] + p * dt
        powers_out[i] = p
        residual = residual + p
        ev_power = ev_power + p
    return ev_power, house_rw + ev_power


def uncontrolled_rollout(
    occupancy,
    arrival_energy,
    house_rw,
    price,
    capacity,
    max_power,
    dt,
    station_power,
    station_energy,
    ev_power,
    total_load,
    step_cost,
):
    """Year-long uncontrolled charging: every connected EV draws maximum
    power until full, with the last step trimmed so energy lands exactly at
    capacity. Output arrays are written in place; departures are returned
    as a list of (step, ev_id, energy_kwh).
    """
    n_steps = occupancy.shape[0]
    n_stations = occupancy.shape[1]
    energies = [0.0] * n_stations
    departures = []

    for s in range(n_stations):
        if occupancy[0, s] != 0:
            energies[s] = arrival_energy[occupancy[0, s]]
            station_energy[0, s] = energies[s]
    ev_power[0] = 0.0
    total_load[0] = house_rw[0]
    step_cost[0] = total_load[0] * dt * price[0]

    for t in range(1, n_steps):
        for s in range(n_stations):
            prev = occupancy[t - 1, s]
            cur = occupancy[t, s]
            if cur != prev:
                if prev != 0:
                    departures.append((t, int(prev), energies[s]))
                    energies[s] = 0.0
                if cur != 0:
                    energies[s] = arrival_energy[cur]
        total_p = 0.0
        for s in range(n_stations):
            p = 0.0
            if occupancy[t, s] != 0:
                p = (capacity - energies[s]) / dt
                if p > max_power:
                    p = max_power
                energies[s] = energies[s] + p * dt
            station_power[t, s] = p
            station_energy[t, s] = energies[s]
            total_p = total_p + p
        ev_power[t] = total_p
        total_load[t] = house_rw[t] + total_p
        step_cost[t] = total_load[t] * dt * price[t]

    for s in range(n_stations):
        if occupancy[n_steps - 1, s] != 0:
            departures.append((n_steps - 1, int(occupancy[n_steps - 1, s]), energies[s]))
    return departures
