"""Tests for run-configuration parsing and normalization."""

import json

import pytest
from jsonschema import Draft202012Validator

from csvortex.config import (
    CONFIG_SCHEMA,
    PlaneDomain,
    RadialDomain,
    TorusDomain,
    normalize,
    parse_config,
)
from csvortex.errors import ConstraintError, SchemaError


def doc(**kw):
    base = {
        'mode': 'radial-topological',
        'coupling': {'kappa': 1.0},
        'vortices': [{'x': 0, 'y': 0, 'n': 1}],
    }
    return {**base, **kw}


TORUS_DOMAIN = {'Lx': 6.283185307179586, 'Ly': 6.283185307179586, 'nx': 32, 'ny': 32}


class TestCoupling:
    """Test κ/λ handling."""

    def test_kappa(self):
        """Test κ = 1 gives λ = 12."""
        cfg = parse_config(doc())
        assert cfg.lambda_ == 12.0
        assert cfg.kappa == 1.0

    def test_lambda(self):
        """Test λ is kept as given."""
        cfg = parse_config(doc(coupling={'lambda': 3.0}))
        assert cfg.lambda_ == 3.0
        assert cfg.kappa == pytest.approx(2.0)

    @pytest.mark.parametrize('coupling', [{}, {'kappa': 1.0, 'lambda': 12.0}])
    def test_exactly_one(self, coupling):
        """Test neither or both of κ and λ are refused."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(coupling=coupling))
        assert exc.value.path == '$.coupling'

    def test_positive(self):
        """Test non-positive couplings are refused."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(coupling={'lambda': 0}))
        assert exc.value.path == '$.coupling.lambda'


class TestSchema:
    """Test structural errors carry the offending path."""

    def test_invalid_json(self):
        """Test malformed text."""
        with pytest.raises(SchemaError, match='invalid JSON'):
            parse_config('{"mode": ')

    def test_not_an_object(self):
        """Test a top-level array is refused."""
        with pytest.raises(SchemaError):
            parse_config('[]')

    def test_unknown_field(self):
        """Test unknown fields are refused at any depth."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(colour='red'))
        assert exc.value.path == '$.colour'
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(solver={'K': 10}))
        assert exc.value.path == '$.solver.K'

    def test_unknown_mode(self):
        """Test the mode must be one of the six."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='sphere'))
        assert exc.value.path == '$.mode'

    def test_wrong_type(self):
        """Test mistyped fields, including booleans posing as numbers."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='torus', domain={**TORUS_DOMAIN, 'nx': 32.0}))
        assert exc.value.path == '$.domain.nx'
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(vortices=[{'x': True, 'y': 0}]))
        assert exc.value.path == '$.vortices[0].x'

    def test_odd_grid(self):
        """Test torus grids must be even and at least 16."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='torus', domain={**TORUS_DOMAIN, 'ny': 31}))
        assert exc.value.path == '$.domain.ny'

    def test_duplicate_vortices(self):
        """Test repeated vortex points are refused."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='torus', domain=TORUS_DOMAIN, vortices=[{'x': 1, 'y': 1}, {'x': 1, 'y': 1}]))
        assert exc.value.path == '$.vortices'

    def test_plane_schedule(self):
        """Test the plane schedule must be increasing."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='plane', domain={'R_schedule': [4, 2], 'n': 31}))
        assert exc.value.path == '$.domain.R_schedule'

    def test_schema_is_valid(self):
        """Test the configuration schema is itself a valid 2020-12 schema."""
        Draft202012Validator.check_schema(CONFIG_SCHEMA)

    def test_missing_field_path(self):
        """Test a missing required field is reported at its own path."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='torus'))
        assert exc.value.path == '$.domain'
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='radial-sweep'))
        assert exc.value.path == '$.targets'

    def test_out_of_range_value(self):
        """Test numeric bounds come back with the field path."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='plane', domain={'R_schedule': [2, 4], 'n': 2}))
        assert exc.value.path == '$.domain.n'
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(vortices=[{'x': 0, 'y': 0, 'n': 0}]))
        assert exc.value.path == '$.vortices[0].n'

    def test_error_dict(self):
        """Test the machine-readable form."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(mode='sphere'))
        assert exc.value.to_dict()['code'] == 'schema_error'


class TestConstraints:
    """Test well-formed but inadmissible configurations."""

    @pytest.mark.parametrize('beta', [6, 5.5, 1])
    def test_beta_floor(self, beta):
        """Test β must exceed 2N + 4."""
        with pytest.raises(ConstraintError):
            parse_config(doc(mode='radial-nontopological', targets={'beta': beta}))

    def test_beta_or_a(self):
        """Test non-topological runs need exactly one of β and a."""
        with pytest.raises(SchemaError):
            parse_config(doc(mode='radial-nontopological'))
        with pytest.raises(SchemaError):
            parse_config(doc(mode='radial-nontopological', targets={'beta': 8, 'a': -3}))

    def test_K_factor(self):
        """Test K below 6λ is refused."""
        with pytest.raises(ConstraintError):
            parse_config(doc(solver={'K_factor': 5}))

    def test_radial_needs_coincident(self):
        """Test radial modes need all vortices at one point."""
        with pytest.raises(ConstraintError):
            parse_config(doc(vortices=[{'x': 0, 'y': 0}, {'x': 1, 'y': 0}]))

    def test_no_vortex(self):
        """Test N = 0 is allowed only where the trivial solution is meaningful."""
        assert parse_config(doc(vortices=[])).N == 0
        assert parse_config(doc(mode='torus', domain=TORUS_DOMAIN, vortices=[])).N == 0
        with pytest.raises(ConstraintError):
            parse_config(doc(mode='lambda-critical', domain=TORUS_DOMAIN, vortices=[]))

    def test_offset_range(self):
        """Test sweep offsets must lie below a₀."""
        with pytest.raises(ConstraintError):
            parse_config(doc(mode='radial-sweep', targets={'a_offset_range': [-5, 1]}))

    def test_targets_per_mode(self):
        """Test targets belonging to another mode are refused."""
        with pytest.raises(SchemaError) as exc:
            parse_config(doc(targets={'beta': 8}))
        assert exc.value.path == '$.targets.beta'


class TestNormalize:
    """Test canonical forms."""

    def test_defaults(self):
        """Test defaults are filled in."""
        cfg = parse_config(doc())
        assert cfg.domain == RadialDomain()
        assert cfg.solver.K_factor == 6.0
        assert cfg.output == 'out'
        plane = parse_config(doc(mode='plane', domain={'R_schedule': [2, 4], 'n': 31}))
        assert plane.domain == PlaneDomain((2.0, 4.0), 31)
        torus = parse_config(doc(mode='torus', domain=TORUS_DOMAIN))
        assert isinstance(torus.domain, TorusDomain)
        assert torus.domain.laplacian == 'fd'

    @pytest.mark.parametrize('d', [
        doc(),
        doc(mode='radial-sweep', targets={'a_offset_range': [-10, -1], 'samples': 5}),
        doc(mode='torus', domain=TORUS_DOMAIN, coupling={'lambda': 20}),
        doc(mode='plane', domain={'R_schedule': [2, 4], 'n': 31, 'closure': 'asymptotic'}, targets={'subsolution_a': 1}),
    ])
    def test_idempotent(self, d):
        """Test normalizing a normalized document changes nothing."""
        once = normalize(d)
        assert normalize(json.dumps(once)) == once

    def test_digest(self):
        """Test the hash ignores key order and tracks content."""
        a = parse_config(doc())
        b = parse_config(dict(reversed(list(doc().items()))))
        assert a.digest() == b.digest()
        assert a.digest() != parse_config(doc(coupling={'kappa': 2.0})).digest()

    def test_overrides(self):
        """Test --lambda and --out overrides."""
        cfg = parse_config(doc()).with_overrides(lambda_=3.0, output='elsewhere')
        assert cfg.lambda_ == 3.0
        assert cfg.output == 'elsewhere'
        assert normalize(cfg.to_dict())['coupling'] == {'lambda': 3.0}
        with pytest.raises(ConstraintError):
            parse_config(doc()).with_overrides(lambda_=-1.0)

    def test_options(self):
        """Test solver settings reach the solver option objects."""
        cfg = parse_config(doc(mode='torus', domain={**TORUS_DOMAIN, 'laplacian': 'spectral'}, solver={'tol': 1e-8}))
        opts = cfg.solver_options()
        assert opts.laplacian == 'spectral'
        assert opts.tol == 1e-8
        shoot = parse_config(doc(domain={'t_start': -15, 't_max': 30})).shooting_options()
        assert shoot.t_start == -15.0
        assert shoot.t_max == 30.0
