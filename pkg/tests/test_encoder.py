"""Binary-program encoding: registry, rows, point semantics, LP export."""
from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diagopt.candidates import CandidateFamily
from diagopt.core import Assignment, evaluate, route
from diagopt.encoder import (
    BuildError,
    DecodeError,
    VariablePoint,
    build_model,
    decode,
    encode_assignment,
    export_lp,
)
from conftest import random_feasible_assignment as random_feasible
from conftest import random_toy_instance, tiny_instance, valid_diagram
from lp_reader import parse_lp

SIDE_ROWS = ("budget", "target_obj1", "target_obj2", "target_obj3")


def structural_violations(model, point) -> tuple[str, ...]:
    return tuple(v for v in model.violations(point) if not v.startswith(SIDE_ROWS))


class TestRegistry:
    def test_variable_counts_single_vertex(self):
        model = build_model(tiny_instance(), 1)
        assert model.variable_counts == {
            "p": 2, "q": 8, "alpha": 3, "beta": 2, "gamma": 8, "z": 4,
        }
        assert model.num_variables == 27

    def test_count_formulas_on_a_toy(self, rng):
        inst = random_toy_instance(rng)
        model = build_model(inst, 1)
        n_t = len(inst.population.types)
        n_u = len(inst.diagram.internals)
        n_s = len(inst.diagram.sinks)
        n_m = len(inst.population.methods)
        n_v = n_u + n_s
        counts = model.variable_counts
        assert counts["p"] == sum(len(inst.families[u]) for u in inst.diagram.internals)
        assert counts["q"] == n_s * n_m
        assert counts["alpha"] == n_t * n_v
        assert counts["beta"] == 2 * n_t * n_u
        assert counts["gamma"] == n_t * n_s * n_m
        assert counts["z"] == n_t * n_m

    def test_row_count_formula(self, rng):
        inst = random_toy_instance(rng)
        for setting, side in ((1, 1), (2, 3), (3, 3)):
            model = build_model(inst, setting)
            n_t = len(inst.population.types)
            n_u = len(inst.diagram.internals)
            n_s = len(inst.diagram.sinks)
            n_m = len(inst.population.methods)
            n_v = n_u + n_s
            want = (
                (n_u + n_s)
                + n_t * (1 + (n_v - 1) + len(inst.diagram.arcs))
                + 6 * n_t * n_u
                + 3 * n_t * n_s * n_m
                + n_t * (n_m + n_s * n_m)
                + side
            )
            assert model.num_constraints == want

    def test_settings_share_the_registry(self):
        inst = tiny_instance()
        names = {s: build_model(inst, s).names for s in (1, 2, 3)}
        assert names[1] == names[2] == names[3]

    def test_unknown_setting_rejected(self):
        with pytest.raises(BuildError):
            build_model(tiny_instance(), 4)

    def test_infeasible_initial_assignment_rejected(self):
        inst = tiny_instance()
        bad = Assignment.build({"r": {1}}, {"s0": 0, "s1": 1})  # {1} not a candidate
        broken = type(inst)(
            diagram=inst.diagram,
            population=inst.population,
            families=inst.families,
            initial=bad,
            budget=inst.budget,
            targets=inst.targets,
        )
        with pytest.raises(BuildError):
            build_model(broken, 1)


class TestSettingShapes:
    def test_objective_senses(self):
        inst = tiny_instance()
        assert build_model(inst, 1).objective_sense == "Maximize"
        assert build_model(inst, 2).objective_sense == "Minimize"
        assert build_model(inst, 3).objective_sense == "Maximize"

    def test_side_rows_per_setting(self):
        inst = tiny_instance()
        rows = {s: {r.name for r in build_model(inst, s).rows} for s in (1, 2, 3)}
        assert "budget" in rows[1] and not rows[1] & {"target_obj1", "target_obj2"}
        assert "budget" not in rows[2] and {"target_obj1", "target_obj2", "target_obj3"} <= rows[2]
        assert "budget" in rows[3] and "target_obj1" not in rows[3]
        assert {"target_obj2", "target_obj3"} <= rows[3]

    def test_similarity_target_may_be_fractional(self):
        inst = tiny_instance(targets=(3, 1, 1))
        model = build_model(inst, 2)
        row = next(r for r in model.rows if r.name == "target_obj1")
        assert row.rhs == Fraction(3, 2)

    def test_setting1_objective_coefficients(self):
        inst = tiny_instance(targets=(3, 5, 7))
        model = build_model(inst, 1)
        coefs = dict((idx, c) for c, idx in model.objective)
        p_initial = model.p_index["r"][frozenset({0})]
        assert coefs[p_initial] == Fraction(1, 3)


class TestEncode:
    def test_hand_propagated_point(self):
        inst = tiny_instance()  # type 0 is positive on item 0
        model = build_model(inst, 1)
        phi = Assignment.build({"r": {0}}, {"s0": 0, "s1": 2})
        pt = encode_assignment(model, phi)
        assert pt["a_t0_v0"] == 1  # source always visited
        assert pt["a_t0_v1"] == 0  # zero-labeled sink not reached
        assert pt["a_t0_v2"] == 1  # one-labeled sink reached
        assert pt["b_t0_u0_l1"] == 1
        assert pt["b_t0_u0_l0"] == 0
        assert pt["q_s1_m2"] == 1
        assert pt["g_t0_s1_m2"] == 1
        assert pt["g_t0_s0_m0"] == 0
        assert pt["z_t0_m2"] == 1

    def test_each_type_gets_exactly_one_method(self, rng):
        inst = random_toy_instance(rng)
        model = build_model(inst, 1)
        phi = random_feasible(inst, rng)
        pt = encode_assignment(model, phi)
        n_m = len(model.methods)
        for ti in range(model.n_types):
            zs = [pt.values[model.z_idx(ti, m)] for m in model.methods]
            assert sum(zs) == 1

    def test_identity_assignment_scores_full_similarity(self):
        inst = tiny_instance()
        model = build_model(inst, 3)
        pt = encode_assignment(model, inst.initial)
        assert model.metrics_at(pt).obj1 == len(inst.diagram.vertices)

    def test_infeasible_assignment_rejected(self):
        inst = tiny_instance()
        model = build_model(inst, 1)
        bad = Assignment.build({"r": {1}}, {"s0": 0, "s1": 1})
        with pytest.raises(BuildError):
            encode_assignment(model, bad)

    def test_encoded_points_satisfy_all_structural_rows(self, rng):
        for _ in range(25):
            inst = random_toy_instance(rng)
            models = [build_model(inst, s) for s in (1, 2, 3)]
            for _ in range(8):
                phi = random_feasible(inst, rng)
                pt = encode_assignment(models[0], phi)
                for model in models:
                    shared = VariablePoint(model=model, values=pt.values)
                    assert structural_violations(model, shared) == ()

    def test_z_block_matches_scalar_routing(self, rng):
        for _ in range(10):
            inst = random_toy_instance(rng)
            model = build_model(inst, 1)
            phi = random_feasible(inst, rng)
            pt = encode_assignment(model, phi)
            for ti, t in enumerate(inst.population.types):
                m = route(inst.diagram, phi, t, inst.population.items).method
                for other in model.methods:
                    want = 1 if other == m else 0
                    assert pt.values[model.z_idx(ti, other)] == want

    def test_objective_expressions_match_scalar_metrics(self, rng):
        for _ in range(10):
            inst = random_toy_instance(rng)
            model = build_model(inst, 1)
            phi = random_feasible(inst, rng)
            pt = encode_assignment(model, phi)
            want = evaluate(inst.diagram, phi, inst.initial, inst.population)
            assert model.metrics_at(pt) == want


class TestEncodeProperty:
    """Encoding soundness over hypothesis-generated diagrams and populations."""

    @settings(max_examples=60, deadline=None)
    @given(valid_diagram(max_internal=3, max_sinks=2), st.data())
    def test_any_feasible_assignment_encodes_cleanly(self, d, data):
        from diagopt.core import ItemUniverse, MethodUniverse, Population
        from diagopt.encoder import Instance
        from conftest import make_type

        items = ItemUniverse((0, 1, 2))
        methods = MethodUniverse(methods=(0, 1), costs=(0, 100))
        n_types = data.draw(st.integers(1, 4))
        types = tuple(
            make_type(
                i,
                data.draw(st.integers(1, 5)),
                data.draw(st.sets(st.integers(0, 2))),
                data.draw(st.sets(st.sampled_from(methods.methods))),
                data.draw(st.integers(0, 1)),
                items,
                methods,
            )
            for i in range(n_types)
        )
        pop = Population(items=items, methods=methods, types=types)

        families = {}
        node_labels = {}
        role = frozenset(items.items)
        for u in d.internals:
            cands = data.draw(
                st.sets(
                    st.frozensets(st.integers(0, 2)), min_size=1, max_size=3
                )
            )
            families[u] = CandidateFamily(
                vertex=u, candidates=frozenset(cands), role=role
            )
            node_labels[u] = data.draw(st.sampled_from(sorted(cands, key=sorted)))
        sink_labels = {
            s: data.draw(st.sampled_from(methods.methods)) for s in d.sinks
        }
        inst = Instance(
            diagram=d,
            population=pop,
            families=families,
            initial=Assignment.build(node_labels, sink_labels),
            budget=10**6,
            targets=(len(d.vertices), 1, 1),
        )
        model = build_model(inst, 1)

        phi = Assignment(
            node_items={
                u: data.draw(st.sampled_from(inst.candidate_order(u)))
                for u in d.internals
            },
            sink_methods={
                s: data.draw(st.sampled_from(methods.methods)) for s in d.sinks
            },
        )
        pt = encode_assignment(model, phi)
        assert structural_violations(model, pt) == ()
        assert decode(model, pt) == phi
        assert model.metrics_at(pt) == evaluate(
            inst.diagram, phi, inst.initial, inst.population
        )
        for ti, t in enumerate(inst.population.types):
            m = route(inst.diagram, phi, t, items).method
            assert pt.values[model.z_idx(ti, m)] == 1


class TestDecode:
    def test_round_trip(self, rng):
        for _ in range(10):
            inst = random_toy_instance(rng)
            model = build_model(inst, 2)
            phi = random_feasible(inst, rng)
            assert decode(model, encode_assignment(model, phi)) == phi

    def test_empty_p_block_rejected(self):
        inst = tiny_instance()
        model = build_model(inst, 1)
        pt = VariablePoint(model=model, values=np.zeros(model.num_variables, dtype=np.int8))
        with pytest.raises(DecodeError):
            decode(model, pt)

    def test_double_q_block_rejected(self):
        inst = tiny_instance()
        model = build_model(inst, 1)
        values = np.zeros(model.num_variables, dtype=np.int8)
        values[model.p_index["r"][frozenset({0})]] = 1
        for m in (0, 1):
            values[model.q_index["s0"][m]] = 1
        values[model.q_index["s1"][0]] = 1
        with pytest.raises(DecodeError):
            decode(model, VariablePoint(model=model, values=values))


class TestExhaustiveCorrespondence:
    def test_satisfying_points_are_exactly_the_assignments(self):
        """Every 0/1 solution of the row system is an encoded assignment."""
        inst = tiny_instance(n_methods=2, budget=10**9, targets=(3, 1, 1))
        model = build_model(inst, 1)
        nv = model.num_variables
        assert nv == 17

        grid = ((np.arange(1 << nv, dtype=np.uint32)[:, None] >> np.arange(nv)[None, :]) & 1
                ).astype(np.int8)
        a, senses, rhs = model._compiled
        lhs = grid @ a.toarray().astype(np.int64).T
        ok = np.ones(len(grid), dtype=bool)
        ok &= ((senses != -1) | (lhs <= rhs)).all(axis=1)
        ok &= ((senses != 0) | (lhs == rhs)).all(axis=1)
        ok &= ((senses != 1) | (lhs >= rhs)).all(axis=1)
        sat = np.nonzero(ok)[0]

        n_assignments = 2 * 2 * 2  # |family(r)| * |M|^|S|
        assert len(sat) == n_assignments

        seen = set()
        for row in sat:
            pt = VariablePoint(model=model, values=grid[row])
            phi = decode(model, pt)
            seen.add((phi.node_items["r"], phi.sink_methods["s0"], phi.sink_methods["s1"]))
            want = evaluate(inst.diagram, phi, inst.initial, inst.population)
            assert model.metrics_at(pt) == want
            re_encoded = encode_assignment(model, phi)
            assert np.array_equal(re_encoded.values, grid[row])
        assert len(seen) == n_assignments


class TestParallelArcs:
    """Both arcs of a vertex may enter the same head; every type passes through."""

    def make(self):
        from diagopt.core import Arc, Diagram, ItemUniverse, MethodUniverse, Population
        from diagopt.encoder import Instance
        from conftest import family, make_type

        items = ItemUniverse((0, 1))
        methods = MethodUniverse(methods=(0, 1), costs=(0, 100))
        pop = Population(
            items=items,
            methods=methods,
            types=(
                make_type(0, 2, {0}, {1}, 1, items, methods),
                make_type(1, 3, set(), {1}, 0, items, methods),
            ),
        )
        d = Diagram(
            vertices=("r", "v", "s"),
            arcs=(Arc("r", "v", 0), Arc("r", "v", 1), Arc("v", "s", 0), Arc("v", "s", 1)),
        )
        return Instance(
            diagram=d,
            population=pop,
            families={"r": family("r", [set(), {0}], {0, 1}),
                      "v": family("v", [set(), {1}], {0, 1})},
            initial=Assignment.build({"r": {0}, "v": {1}}, {"s": 0}),
            budget=1000,
            targets=(3, 1, 1),
        )

    def test_every_type_reaches_the_sink(self):
        inst = self.make()
        model = build_model(inst, 1)
        phi = Assignment.build({"r": {0}, "v": set()}, {"s": 1})
        pt = encode_assignment(model, phi)
        assert structural_violations(model, pt) == ()
        for ti in range(model.n_types):
            assert pt.values[model.alpha_idx(ti, "v")] == 1
            assert pt.values[model.alpha_idx(ti, "s")] == 1
        m = model.metrics_at(pt)
        assert (m.cost, m.obj2, m.obj3) == (500, 5, 2)
        assert m == evaluate(inst.diagram, phi, inst.initial, inst.population)

    def test_solvers_agree(self):
        from diagopt.solver import brute_force, solve

        inst = self.make()
        for setting in (1, 2, 3):
            fast = solve(inst, setting)
            slow = brute_force(inst, setting)
            assert fast.status == slow.status
            assert fast.assignment == slow.assignment


class TestDegenerateDiagram:
    """Source-is-sink diagrams and empty populations still encode correctly."""

    def make(self, n_types: int = 0):
        from diagopt.core import Diagram, ItemUniverse, MethodUniverse, Population
        from diagopt.encoder import Instance
        from conftest import make_type

        items = ItemUniverse((0,))
        methods = MethodUniverse(methods=(0, 1), costs=(0, 100))
        types = tuple(
            make_type(i, 1, {0}, {1}, 1, items, methods) for i in range(n_types)
        )
        pop = Population(items=items, methods=methods, types=types)
        d = Diagram(vertices=("r",), arcs=())
        return Instance(
            diagram=d,
            population=pop,
            families={},
            initial=Assignment.build({}, {"r": 0}),
            budget=1000,
            targets=(1, 1, 1),
        )

    def test_empty_population_model(self):
        model = build_model(self.make(0), 1)
        assert model.num_variables == 2  # just the q block
        assert model.num_constraints == 2  # one assignment row plus the budget
        phi = Assignment.build({}, {"r": 1})
        pt = encode_assignment(model, phi)
        assert model.violations(pt) == ()
        assert decode(model, pt) == phi

    def test_single_vertex_with_types(self):
        model = build_model(self.make(2), 3)
        phi = Assignment.build({}, {"r": 1})
        pt = encode_assignment(model, phi)
        assert structural_violations(model, pt) == ()
        m = model.metrics_at(pt)
        assert (m.cost, m.obj2, m.obj3) == (200, 2, 2)

    def test_export_parses(self):
        model = build_model(self.make(1), 2)
        parsed = parse_lp(export_lp(model))
        assert parsed.variable_count == model.num_variables
        assert parsed.constraint_count == model.num_constraints


class TestExportLp:
    def test_sense_keyword_first(self):
        inst = tiny_instance()
        assert export_lp(build_model(inst, 1)).startswith("Maximize\n")
        assert export_lp(build_model(inst, 2)).startswith("Minimize\n")
        assert export_lp(build_model(inst, 3)).startswith("Maximize\n")

    def test_reexport_is_byte_identical(self):
        inst = tiny_instance()
        model = build_model(inst, 1)
        assert export_lp(model) == export_lp(model)
        again = build_model(inst, 1)
        assert export_lp(model) == export_lp(again)

    def test_parse_back_preserves_structure(self, rng):
        for setting in (1, 2, 3):
            inst = random_toy_instance(rng)
            model = build_model(inst, setting)
            parsed = parse_lp(export_lp(model))
            assert parsed.sense == model.objective_sense
            assert parsed.variable_count == model.num_variables
            assert parsed.constraint_count == model.num_constraints
            assert parsed.binaries == list(model.names)

    def test_parse_back_recovers_rows_exactly(self):
        inst = tiny_instance(targets=(3, 5, 7))
        model = build_model(inst, 2)
        parsed = parse_lp(export_lp(model))
        by_name = {row.name: row for row in parsed.rows}
        assert len(by_name) == model.num_constraints
        for row in model.rows:
            got = by_name[row.name]
            assert got.sense == row.sense
            assert float(got.rhs) == pytest.approx(float(row.rhs))
            want = {}
            for coef, idx in row.terms:
                name = model.names[idx]
                want[name] = want.get(name, 0) + coef
            assert set(got.terms) == set(want)
            for name, coef in want.items():
                assert float(got.terms[name]) == pytest.approx(float(coef))

    def test_fractional_objective_survives_round_trip(self):
        inst = tiny_instance(targets=(3, 5, 7))
        model = build_model(inst, 1)
        parsed = parse_lp(export_lp(model))
        p_initial = model.names[model.p_index["r"][frozenset({0})]]
        assert float(parsed.objective.terms[p_initial]) == pytest.approx(1 / 3)

    def test_long_rows_wrap_into_continuation_lines(self):
        inst = tiny_instance(weights=tuple([3] * 9), positive=tuple({0} for _ in range(9)),
                             responds=tuple({1} for _ in range(9)), improves=tuple([1] * 9))
        model = build_model(inst, 2)
        text = export_lp(model)
        assert all(len(line) <= 80 for line in text.splitlines())
        parsed = parse_lp(text)
        assert parsed.constraint_count == model.num_constraints

    def test_all_zero_cost_objective_still_parses(self):
        import dataclasses

        from diagopt.core import MethodUniverse
        from diagopt.encoder import Instance

        base = tiny_instance(n_methods=2)
        free = MethodUniverse(methods=(0, 1), costs=(0, 0))
        inst = Instance(
            diagram=base.diagram,
            population=dataclasses.replace(base.population, methods=free),
            families=base.families,
            initial=base.initial,
            budget=base.budget,
            targets=base.targets,
        )
        model = build_model(inst, 2)
        assert model.objective == ()
        text = export_lp(model)
        assert "\n obj: 0 " in text
        parsed = parse_lp(text)
        assert parsed.sense == "Minimize"
        assert parsed.constraint_count == model.num_constraints
