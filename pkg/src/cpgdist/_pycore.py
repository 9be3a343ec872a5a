"""Pure-Python proposal sweep, used when the compiled core is unavailable."""


def sweep(seq, cum, sites, levels):
    n = len(seq)
    state = seq.tolist()
    table = cum.tolist()
    accepted = 0
    for i, u in zip(sites.tolist(), levels.tolist()):
        row = table[16 * state[i - 1] + 4 * state[i] + state[(i + 1) % n]]
        if u >= row[3]:
            continue
        y = 0
        while u >= row[y]:
            y += 1
        state[i] = y
        accepted += 1
    seq[:] = state
    return accepted
