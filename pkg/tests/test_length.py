import json
import math

import numpy as np
import pytest

from mmconc.concentration import BoundSpec, alpha_exact, default_eps_grid, theoretical_bound
from mmconc.exceptions import CapExceededError, ValidationError
from mmconc.groups import (l1_vanishing_chain, make_cube, make_l1_group, make_uniform_symmetric,
                           make_weighted_symmetric, stabilizer_subgroups)
from mmconc.length import (LengthCertificate, PartitionChain, SubgroupChainSpec, Witness, stabilizer_chain,
                           subgroup_chain_bound, verify_certificate)

PROFILES = [(0.25, 0.25, 0.25, 0.25), (0.5, 0.3, 0.2), (0.4, 0.3, 0.2, 0.1)]


class TestPartitionChain:
    def test_blocks_and_siblings(self):
        chain = PartitionChain([np.zeros(4, int), np.array([0, 0, 1, 1]), np.arange(4)])
        assert chain.depth == 2 and chain.point_count == 4
        assert [b.tolist() for b in chain.blocks(1)] == [[0, 1], [2, 3]]
        assert chain.sibling_pairs(2) == [(0, 1), (2, 3)]
        assert chain.sibling_pairs(1) == [(0, 1)]

    def test_round_trip(self):
        chain = PartitionChain([np.zeros(6, int), np.arange(6) // 2, np.arange(6)])
        again = PartitionChain.from_blocks(chain.to_blocks())
        assert all(np.array_equal(a, b) for a, b in zip(chain.labels, again.labels))


class TestStabilizerChain:
    def test_uniform_length_is_one(self):
        assert stabilizer_chain([0.25] * 4).length == pytest.approx(1.0, abs=1e-15)

    def test_weighted_length(self):
        assert stabilizer_chain([0.5, 0.3, 0.2]).length == pytest.approx(2 * math.sqrt(0.38), abs=1e-15)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_uniform_certificates_verify(self, k):
        w = [1 / k] * k
        rep = verify_certificate(make_weighted_symmetric(w), stabilizer_chain(w))
        assert rep.passed, rep.failures[:3]
        assert all(c == t for c, t in rep.coverage.values())

    @pytest.mark.parametrize("w", PROFILES)
    def test_profiles_verify(self, w):
        assert verify_certificate(make_weighted_symmetric(w), stabilizer_chain(w)).passed

    @pytest.mark.parametrize("w", PROFILES)
    def test_bound_equals_weighted_aut(self, w):
        cert = stabilizer_chain(w)
        spec = BoundSpec("weighted_aut", weights=w)
        for e in default_eps_grid():
            assert abs(cert.bound(e) - theoretical_bound(spec, e)) <= 1e-12

    def test_alpha_below_certificate_bound(self):
        w = (0.5, 0.3, 0.2)
        sp = make_weighted_symmetric(w)
        cert = stabilizer_chain(w)
        for e in alpha_exact(sp, default_eps_grid(sp)).entries:
            assert e.alpha <= cert.bound(e.eps) + 1e-9

    def test_cap(self):
        with pytest.raises(CapExceededError):
            stabilizer_chain(np.full(9, 1 / 9))

    def test_rule_witnesses_for_large_blocks(self):
        w = [1 / 6] * 6
        cert = stabilizer_chain(w, explicit_limit=10)
        assert any(wt.rule is not None for wt in cert.witnesses.values())
        assert verify_certificate(make_uniform_symmetric(6), cert).passed

    def test_json_round_trip(self, tmp_path):
        w = (0.4, 0.3, 0.2, 0.1)
        cert = stabilizer_chain(w)
        path = tmp_path / "cert.json"
        path.write_text(json.dumps(cert.to_json()))
        again = LengthCertificate.from_json(json.loads(path.read_text()))
        assert again.length == cert.length
        assert verify_certificate(make_weighted_symmetric(w), again).passed


class TestTampering:
    def test_duplicate_image_is_reported(self):
        w = (0.5, 0.3, 0.2)
        cert = stabilizer_chain(w)
        key = (1, 0, 1)
        img = np.array(cert.witnesses[key].image)
        img[1] = img[0]
        cert.witnesses[key] = Witness(image=img)
        rep = verify_certificate(make_weighted_symmetric(w), cert)
        assert not rep.passed
        assert rep.failures[0][:3] == (1, 0, 1) and "bijection" in rep.failures[0][4]

    def test_shrunken_level_bound_is_reported(self):
        w = (0.5, 0.3, 0.2)
        cert = stabilizer_chain(w)
        cert.level_bounds = cert.level_bounds * 0.5
        rep = verify_certificate(make_weighted_symmetric(w), cert)
        assert not rep.passed
        level, a, b, x, reason = rep.failures[0]
        assert x >= 0 and "exceeds" in reason
        assert rep.bound is None

    def test_missing_witness(self):
        w = (0.5, 0.3, 0.2)
        cert = stabilizer_chain(w)
        del cert.witnesses[(2, 0, 1)]
        rep = verify_certificate(make_weighted_symmetric(w), cert)
        assert any(f[4] == "missing witness" for f in rep.failures)

    def test_non_refining_chain(self):
        labels = [np.zeros(4, int), np.array([0, 0, 1, 1]), np.array([0, 1, 1, 2]), np.arange(4)]
        cert = LengthCertificate(PartitionChain(labels), [1.0, 1.0, 1.0])
        rep = verify_certificate(make_cube(2), cert)
        assert not rep.passed and "refine" in rep.failures[0][4]

    def test_wrong_point_count(self):
        cert = stabilizer_chain([0.5, 0.5])
        rep = verify_certificate(make_weighted_symmetric([1 / 3] * 3), cert)
        assert not rep.passed


class TestSubgroupChain:
    def test_hamming_square_diameters(self):
        sp = make_l1_group([0.5, 0.5])
        chain = SubgroupChainSpec(sp, sp.group, l1_vanishing_chain(sp))
        assert chain.diameters.tolist() == [0.5, 0.5]
        assert subgroup_chain_bound(chain, 1.0) == pytest.approx(math.exp(-0.25))

    @pytest.mark.parametrize("m", [2, 3])
    def test_l1_chain_matches_closed_form(self, m):
        w = (0.5, 0.3, 0.2)
        sp = make_l1_group(w, m)
        chain = SubgroupChainSpec(sp, sp.group, l1_vanishing_chain(sp))
        np.testing.assert_allclose(chain.diameters, w, atol=1e-15)
        spec = BoundSpec("l1_chain", weights=w)
        for e in default_eps_grid():
            assert subgroup_chain_bound(chain, e) == theoretical_bound(spec, e)

    def test_symmetric_group_chain(self):
        sp = make_uniform_symmetric(4)
        subs = stabilizer_subgroups(sp)[::-1]
        chain = SubgroupChainSpec(sp, sp.group, subs)
        assert np.all(chain.diameters > 0)
        for e in alpha_exact(sp, default_eps_grid(sp)).entries:
            assert e.alpha <= subgroup_chain_bound(chain, e.eps) + 1e-9

    def test_requires_trivial_start(self):
        sp = make_uniform_symmetric(3)
        with pytest.raises(ValidationError):
            SubgroupChainSpec(sp, sp.group, stabilizer_subgroups(sp))

    def test_rejects_non_bi_invariant_metric(self):
        sp = make_weighted_symmetric([0.5, 0.3, 0.2])
        with pytest.raises(ValidationError, match="bi-invariant"):
            SubgroupChainSpec(sp, sp.group, stabilizer_subgroups(sp)[::-1])
