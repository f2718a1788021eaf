# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled lane of the hot simulation kernels.

Twin of ``_pykernel``: same functions, same argument order, and -- the part
that actually matters -- the exact same floating-point operation order, so
the two lanes produce bit-identical results. Compiled with -O2 and without
fast-math on purpose.
"""

cimport cython


def step_core(
    const long[::1] actions,
    double[::1] energies,
    const unsigned char[::1] occupied,
    double house_rw,
    double min_power,
    double rated_power,
    double max_power,
    double dt,
    double energy_floor,
    double energy_ceiling,
    double force_charge_below,
    double no_discharge_below,
    double[::1] powers_out,
    long[::1] applied_out,
):
    cdef Py_ssize_t n = actions.shape[0]
    cdef Py_ssize_t i
    cdef long a
    cdef double e, p, headroom, drainable
    cdef double residual = house_rw
    cdef double ev_power = 0.0

    for i in range(n):
        a = actions[i]
        if occupied[i] == 0:
            a = 0
        else:
            e = energies[i]
            if e < force_charge_below:
                a = 1
            elif a == 2 and e < no_discharge_below:
                a = 0
            elif a == 1 and e >= energy_ceiling:
                a = 0
        applied_out[i] = a

        p = 0.0
        if a == 1:
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
        elif a == 2:
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
        if a != 0:
            energies[i] = energies[i] + p * dt
        powers_out[i] = p
        residual = residual + p
        ev_power = ev_power + p
    return ev_power, house_rw + ev_power


def uncontrolled_rollout(
    const int[:, ::1] occupancy,
    const double[::1] arrival_energy,
    const double[::1] house_rw,
    const double[::1] price,
    double capacity,
    double max_power,
    double dt,
    double[:, ::1] station_power,
    double[:, ::1] station_energy,
    double[::1] ev_power,
    double[::1] total_load,
    double[::1] step_cost,
):
    cdef Py_ssize_t n_steps = occupancy.shape[0]
    cdef Py_ssize_t n_stations = occupancy.shape[1]
    cdef Py_ssize_t t, s
    cdef int prev, cur
    cdef double p, total_p
    cdef double[8] energies
    cdef list departures = []

    if n_stations > 8:
        raise ValueError("compiled rollout supports at most 8 stations")
    for s in range(n_stations):
        energies[s] = 0.0
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
                    departures.append((t, prev, energies[s]))
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
            departures.append((n_steps - 1, occupancy[n_steps - 1, s], energies[s]))
    return departures
