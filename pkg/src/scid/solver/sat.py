"""CDCL propositional solver.

Two-watched-literal propagation, first-UIP clause learning, VSIDS-style
activities with phase saving, and a geometric restart schedule. The
variable order is seedable and otherwise deterministic (ties break on
variable index), so identical inputs yield identical models.

Internally literals are encoded as ``2*v + (1 if negative)`` so the hot
loops never branch on sign; the public API speaks signed DIMACS literals.
"""

from __future__ import annotations

import heapq
import random

UNASSIGNED = 2


class BudgetExceeded(Exception):
    """Conflict budget exhausted before a verdict was reached."""


def _encode(lit: int) -> int:
    return (lit << 1) if lit > 0 else ((-lit) << 1) | 1


class CdclSolver:
    def __init__(self, nvars: int = 0, seed: int = 0, conflict_limit: int = 2_000_000):
        self.nvars = 0
        self.clauses: list[list[int]] = []  # encoded literals
        self.watches: list[list[int]] = [[], []]
        self.values: list[int] = [UNASSIGNED]  # by var; 0/1/UNASSIGNED
        self.levels: list[int] = [0]
        self.reasons: list[int] = [-1]
        self.activity: list[float] = [0.0]
        self.phase: list[int] = [1]  # preferred sign bit (1 = negative first)
        self.trail: list[int] = []  # encoded literals
        self.trail_lim: list[int] = []
        self.qhead = 0
        self.var_inc = 1.0
        self.var_decay = 1.0 / 0.95
        self.conflict_limit = conflict_limit
        self.conflicts = 0
        self._heap: list[tuple[float, int]] = []
        self._rng = random.Random(seed)
        self._ok = True
        for _ in range(nvars):
            self.new_var()

    def new_var(self) -> int:
        self.nvars += 1
        self.values.append(UNASSIGNED)
        self.levels.append(0)
        self.reasons.append(-1)
        # Tiny seeded jitter makes the initial order seed-dependent while
        # keeping runs with equal seeds identical.
        self.activity.append(self._rng.random() * 1e-9)
        self.phase.append(1)
        self.watches.append([])
        self.watches.append([])
        heapq.heappush(self._heap, (-self.activity[self.nvars], self.nvars))
        return self.nvars

    # ---------------------------------------------------------------- clauses

    def add_clause(self, lits) -> bool:
        """Add a clause (signed lits) at level 0; False on direct conflict."""
        assert not self.trail_lim, "clauses must be added before solving"
        if not self._ok:
            return False
        values = self.values
        seen = set()
        cl = []
        for lit in lits:
            e = _encode(lit)
            if e ^ 1 in seen:
                return True  # tautology
            if e in seen:
                continue
            v = values[e >> 1]
            if v != UNASSIGNED:
                if v ^ (e & 1) == 1:
                    return True  # already satisfied
                continue  # already falsified literal drops out
            seen.add(e)
            cl.append(e)
        if not cl:
            self._ok = False
            return False
        if len(cl) == 1:
            if not self._enqueue(cl[0], -1):
                self._ok = False
                return False
            self._ok = self.propagate() == -1
            return self._ok
        idx = len(self.clauses)
        self.clauses.append(cl)
        self.watches[cl[0] ^ 1].append(idx)
        self.watches[cl[1] ^ 1].append(idx)
        return True

    # ------------------------------------------------------------ propagation

    def _enqueue(self, lit: int, reason: int) -> bool:
        v = lit >> 1
        val = self.values[v]
        if val != UNASSIGNED:
            return val ^ (lit & 1) == 1
        self.values[v] = 1 ^ (lit & 1)
        self.levels[v] = len(self.trail_lim)
        self.reasons[v] = reason
        self.trail.append(lit)
        return True

    def propagate(self) -> int:
        """Unit propagation; returns conflicting clause index or -1."""
        values = self.values
        levels = self.levels
        reasons = self.reasons
        clauses = self.clauses
        watches = self.watches
        trail = self.trail
        trail_lim_len = len(self.trail_lim)
        while self.qhead < len(trail):
            lit = trail[self.qhead]
            self.qhead += 1
            fls = lit ^ 1
            # Clauses watching literal W live in watches[not W]; they need a
            # visit when W is falsified, i.e. when `lit` == not W is assigned.
            watchlist = watches[lit]
            i = 0
            j = 0
            n = len(watchlist)
            while i < n:
                ci = watchlist[i]
                i += 1
                cl = clauses[ci]
                if cl[0] == fls:
                    cl[0] = cl[1]
                    cl[1] = fls
                first = cl[0]
                fv = values[first >> 1]
                if fv != UNASSIGNED and fv ^ (first & 1) == 1:
                    watchlist[j] = ci
                    j += 1
                    continue
                moved = False
                for k in range(2, len(cl)):
                    lk = cl[k]
                    vk = values[lk >> 1]
                    if vk == UNASSIGNED or vk ^ (lk & 1) == 1:
                        cl[1] = lk
                        cl[k] = fls
                        watches[lk ^ 1].append(ci)
                        moved = True
                        break
                if moved:
                    continue
                watchlist[j] = ci
                j += 1
                if fv == UNASSIGNED:
                    v = first >> 1
                    values[v] = 1 ^ (first & 1)
                    levels[v] = trail_lim_len
                    reasons[v] = ci
                    trail.append(first)
                else:
                    # conflict
                    while i < n:
                        watchlist[j] = watchlist[i]
                        j += 1
                        i += 1
                    del watchlist[j:]
                    return ci
            del watchlist[j:]
        return -1

    # ------------------------------------------------------------- heuristics

    def _bump(self, v: int):
        act = self.activity[v] + self.var_inc
        self.activity[v] = act
        if act > 1e100:
            scale = 1e-100
            for i in range(1, self.nvars + 1):
                self.activity[i] *= scale
            self.var_inc *= scale
            self._heap = [(-self.activity[w], w)
                          for w in range(1, self.nvars + 1)
                          if self.values[w] == UNASSIGNED]
            heapq.heapify(self._heap)
        elif self.values[v] == UNASSIGNED:
            heapq.heappush(self._heap, (-act, v))

    def _pick_branch_var(self) -> int:
        heap = self._heap
        values = self.values
        activity = self.activity
        while heap:
            act, v = heapq.heappop(heap)
            if values[v] == UNASSIGNED and -act == activity[v]:
                return v
        for v in range(1, self.nvars + 1):
            if values[v] == UNASSIGNED:
                return v
        return 0

    # ----------------------------------------------------------- backtracking

    def _cancel_until(self, level: int):
        if len(self.trail_lim) <= level:
            return
        bound = self.trail_lim[level]
        values = self.values
        phase = self.phase
        heap = self._heap
        activity = self.activity
        trail = self.trail
        for idx in range(len(trail) - 1, bound - 1, -1):
            lit = trail[idx]
            v = lit >> 1
            phase[v] = lit & 1
            values[v] = UNASSIGNED
            heapq.heappush(heap, (-activity[v], v))
        del trail[bound:]
        del self.trail_lim[level:]
        self.qhead = bound

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        """First-UIP conflict analysis; returns (learnt clause, backjump level)."""
        learnt = [0]
        seen = bytearray(self.nvars + 1)
        levels = self.levels
        clauses = self.clauses
        reasons = self.reasons
        trail = self.trail
        counter = 0
        lit = -1
        idx = len(trail) - 1
        cur_level = len(self.trail_lim)
        reason = confl
        while True:
            cl = clauses[reason]
            for q in (cl if lit == -1 else cl[1:]):
                v = q >> 1
                if not seen[v] and levels[v] > 0:
                    seen[v] = 1
                    self._bump(v)
                    if levels[v] >= cur_level:
                        counter += 1
                    else:
                        learnt.append(q)
            while not seen[trail[idx] >> 1]:
                idx -= 1
            lit = trail[idx]
            v = lit >> 1
            seen[v] = 0
            idx -= 1
            counter -= 1
            if counter == 0:
                break
            reason = reasons[v]
            cl = clauses[reason]
            if cl[0] != lit:
                i = cl.index(lit)
                cl[0], cl[i] = cl[i], cl[0]
        learnt[0] = lit ^ 1
        # Cheap self-subsumption: drop literals implied by the rest.
        if len(learnt) > 1:
            marked = bytearray(self.nvars + 1)
            for q in learnt:
                marked[q >> 1] = 1
            kept = [learnt[0]]
            for q in learnt[1:]:
                r = reasons[q >> 1]
                if r == -1:
                    kept.append(q)
                    continue
                if any(not marked[p >> 1] and levels[p >> 1] > 0
                       for p in clauses[r][1:]):
                    kept.append(q)
            learnt = kept
        if len(learnt) == 1:
            return learnt, 0
        max_i = 1
        max_level = levels[learnt[1] >> 1]
        for i in range(2, len(learnt)):
            li = levels[learnt[i] >> 1]
            if li > max_level:
                max_level = li
                max_i = i
        learnt[1], learnt[max_i] = learnt[max_i], learnt[1]
        return learnt, max_level

    # ----------------------------------------------------------------- search

    def solve(self) -> bool:
        if not self._ok:
            return False
        if self.propagate() != -1:
            self._ok = False
            return False
        restart_limit = 100
        conflicts_at_restart = 0
        while True:
            confl = self.propagate()
            if confl != -1:
                self.conflicts += 1
                conflicts_at_restart += 1
                if not self.trail_lim:
                    self._ok = False
                    return False
                if self.conflicts > self.conflict_limit:
                    raise BudgetExceeded(
                        f"conflict limit {self.conflict_limit} exceeded")
                learnt, back_level = self._analyze(confl)
                self._cancel_until(back_level)
                if len(learnt) == 1:
                    ok = self._enqueue(learnt[0], -1)
                    assert ok
                else:
                    idx = len(self.clauses)
                    self.clauses.append(learnt)
                    self.watches[learnt[0] ^ 1].append(idx)
                    self.watches[learnt[1] ^ 1].append(idx)
                    ok = self._enqueue(learnt[0], idx)
                    assert ok
                self.var_inc *= self.var_decay
            else:
                if conflicts_at_restart >= restart_limit:
                    conflicts_at_restart = 0
                    restart_limit = int(restart_limit * 1.5)
                    self._cancel_until(0)
                    continue
                v = self._pick_branch_var()
                if v == 0:
                    return True
                self.trail_lim.append(len(self.trail))
                ok = self._enqueue((v << 1) | self.phase[v], -1)
                assert ok

    def model_value(self, v: int) -> bool:
        return self.values[v] == 1
