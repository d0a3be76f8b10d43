import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marlab.envs import (
    COOPERATOR,
    PREDATOR,
    PREY,
    EnvConfig,
    ParticleEnv,
    collides,
    make_env,
    write_trajectory,
)


def rollout(env, rng, actions_for):
    state, obs = env.reset(rng)
    states, rews = [state], []
    for t in range(env.cfg.episode_length):
        state, r, obs, done = env.step(state, actions_for(t))
        states.append(state)
        rews.append(r)
    assert done
    return states, np.array(rews)


class TestConstruction:
    def test_spread3_counts_and_zero_velocities(self):
        env = make_env("spread3")
        state, obs = env.reset(np.random.default_rng(0))
        assert state.n_agents == 3
        assert env.n_landmarks == 3 and env.n_obstacles == 0
        assert np.all(state.vel == 0.0)
        assert obs.shape == (3, 14)

    def test_pp6v2_counts(self):
        env = make_env("pp6v2")
        state, obs = env.reset(np.random.default_rng(1))
        assert np.sum(state.role == PREDATOR) == 6
        assert np.sum(state.role == PREY) == 2
        assert env.n_obstacles == 2
        assert obs.shape == (8, 38)

    def test_same_seed_resets_identically(self):
        env = make_env("pp3v1")
        s1, o1 = env.reset(np.random.default_rng(42))
        s2, o2 = env.reset(np.random.default_rng(42))
        assert np.array_equal(s1.pos, s2.pos)
        assert np.array_equal(o1, o2)

    def test_unknown_scenario_rejected(self):
        with pytest.raises(ValueError):
            EnvConfig(scenario="spread99")

    def test_observation_dims_equal_within_and_across_teams(self):
        for scenario in ("spread3", "spread10", "pp3v1", "pp6v2"):
            env = make_env(scenario)
            _, obs = env.reset(np.random.default_rng(3))
            assert obs.shape == (env.n_agents, env.obs_dim)

    def test_team_grouping(self):
        assert make_env("spread10").teams() == [("cooperators", list(range(10)))]
        assert make_env("pp6v2").teams() == [
            ("predators", [0, 1, 2, 3, 4, 5]),
            ("preys", [6, 7]),
        ]


class TestPhysics:
    def test_statics_zero_force_zero_velocity(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(5))
        nxt, _, _, _ = env.step(state, np.zeros((3, 2)))
        assert np.array_equal(nxt.pos, state.pos)
        assert np.all(nxt.vel == 0.0)

    def test_hand_integrated_three_steps(self):
        # Recurrence: v <- (1-damping) v + mult * f, speed-capped; p <- p + v.
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(6))
        f = np.array([1.0, 0.0])
        actions = np.zeros((3, 2))
        actions[0] = f
        cfg = env.cfg
        p = state.pos[0].copy()
        v = np.zeros(2)
        for _ in range(3):
            state, _, _, _ = env.step(state, actions)
            v = (1.0 - cfg.damping) * v + cfg.force_mult * f
            speed = np.linalg.norm(v)
            if speed > cfg.coop_max_speed:
                v = v * (cfg.coop_max_speed / speed)
            p = p + v
        assert np.array_equal(state.pos[0], p)
        assert np.array_equal(state.vel[0], v)
        # third step exercises the cap: raw speed would be 0.115625
        assert np.linalg.norm(state.vel[0]) == pytest.approx(cfg.coop_max_speed)

    def test_action_count_mismatch_raises(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(7))
        with pytest.raises(ValueError):
            env.step(state, np.zeros((2, 2)))

    def test_speed_never_exceeds_cap(self):
        env = make_env("pp3v1")
        rng = np.random.default_rng(8)
        state, _ = env.reset(rng)
        for _ in range(40):
            state, _, _, _ = env.step(
                state, rng.uniform(-1.5, 1.5, size=(env.n_agents, 2))
            )
            speeds = np.linalg.norm(state.vel[:env.n_agents], axis=1)
            assert np.all(speeds <= state.max_speed[:env.n_agents] + 1e-12)

    def test_obstacle_projection_leaves_no_overlap(self):
        env = make_env("pp3v1")
        rng = np.random.default_rng(9)
        state, _ = env.reset(rng)
        # drive everyone at the first obstacle for a while
        ob = state.pos[env.n_agents + env.n_landmarks]
        for _ in range(60):
            towards = ob - state.pos[:env.n_agents]
            norms = np.linalg.norm(towards, axis=1, keepdims=True)
            state, _, _, _ = env.step(state, towards / np.maximum(norms, 1e-9))
        for o in range(env.n_agents + env.n_landmarks, env.n_entities):
            for i in range(env.n_agents):
                gap = np.linalg.norm(state.pos[i] - state.pos[o])
                assert gap >= state.radius[i] + state.radius[o] - 1e-9

    def test_trajectory_determinism(self):
        env = make_env("spread10")
        act_rng = np.random.default_rng(10)
        seq = [act_rng.uniform(-1, 1, size=(10, 2)) for _ in range(25)]
        s1, r1 = rollout(env, np.random.default_rng(11), lambda t: seq[t])
        s2, r2 = rollout(env, np.random.default_rng(11), lambda t: seq[t])
        assert np.array_equal(r1, r2)
        assert all(np.array_equal(a.pos, b.pos) for a, b in zip(s1, s2))


class TestSpreadReward:
    def test_agents_on_landmarks_no_collisions(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(12))
        # put landmarks far apart, agents exactly on them
        state.pos[3:6] = np.array([[-0.8, -0.8], [0.8, -0.8], [0.0, 0.8]])
        state.pos[0:3] = state.pos[3:6]
        rewards = env.spread_rewards(state)
        assert np.all(rewards == 0.0)

    def test_single_landmark_distance(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(13))
        state.pos[3:6] = np.array([[-0.8, -0.8], [0.8, -0.8], [0.0, 0.8]])
        state.pos[0:3] = state.pos[3:6]
        d = 0.3
        state.pos[2, 1] -= d  # nearest agent to landmark 2 now at distance d
        rewards = env.spread_rewards(state)
        assert np.allclose(rewards, -d)

    def test_overlapping_pair_pays_penalty(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(14))
        state.pos[0] = [0.0, 0.0]
        state.pos[1] = [0.1, 0.0]   # centre gap 0.1 < 0.3 radius sum
        state.pos[2] = [5.0, 5.0]
        base = -float(
            sum(
                min(np.linalg.norm(state.pos[a] - state.pos[lm]) for a in range(3))
                for lm in range(3, 6)
            )
        )
        rewards = env.spread_rewards(state)
        assert rewards[0] == pytest.approx(base - 1.0)
        assert rewards[1] == pytest.approx(base - 1.0)
        assert rewards[2] == pytest.approx(base)

    def test_random_layouts_match_bruteforce_oracle(self):
        env = make_env("spread10")
        rng = np.random.default_rng(15)
        for _ in range(20):
            state, _ = env.reset(rng)
            got = env.spread_rewards(state)
            team = 0.0
            for lm in range(10, 20):
                team -= min(
                    float(np.linalg.norm(state.pos[a] - state.pos[lm]))
                    for a in range(10)
                )
            for i in range(10):
                hits = sum(
                    1 for j in range(10) if j != i and collides(state, i, j)
                )
                assert got[i] == pytest.approx(team - hits, rel=0, abs=1e-9)
            assert np.allclose(got - (got - team), team)

    def test_team_term_identical_across_agents(self):
        env = make_env("spread10")
        rng = np.random.default_rng(16)
        state, _ = env.reset(rng)
        got = env.spread_rewards(state)
        hits = np.array(
            [sum(1 for j in range(10) if j != i and collides(state, i, j))
             for i in range(10)],
            dtype=float,
        )
        team_terms = got + hits
        assert np.allclose(team_terms, team_terms[0])


class TestPredatorPreyReward:
    def setup_state(self, env, seed):
        state, _ = env.reset(np.random.default_rng(seed))
        return state

    def test_contact_pays_every_predator(self):
        env = make_env("pp3v1")
        state = self.setup_state(env, 17)
        state.pos[:3] = np.array([[0.0, 0.0], [0.9, 0.9], [-0.9, 0.9]])
        state.pos[3] = [0.05, 0.0]  # inside predator 0's contact radius
        state.pos[4:] = [[0.9, -0.9], [-0.9, -0.9]]
        rewards = env.predator_prey_rewards(state)
        shaped = -0.1 * np.array(
            [np.linalg.norm(state.pos[p] - state.pos[3]) for p in range(3)]
        )
        assert np.allclose(rewards[:3], shaped + 10.0)
        assert rewards[3] < -9.0  # -10 plus positive shaping

    def test_shaping_signs_without_contact(self):
        env = make_env("pp6v2")
        state = self.setup_state(env, 18)
        state.pos[:6] = np.array(
            [[-0.9, -0.9], [-0.9, 0.9], [0.9, -0.9], [0.9, 0.9], [0.0, -0.9], [0.0, 0.9]]
        )
        state.pos[6:8] = [[0.45, 0.0], [-0.45, 0.0]]
        state.pos[8:] = [[5.0, 5.0], [-5.0, -5.0]]  # obstacles out of the way
        rewards = env.predator_prey_rewards(state)
        assert np.all(rewards[:6] < 0.0)
        assert np.all(rewards[6:8] > 0.0)

    def test_random_states_match_pairwise_oracle(self):
        env = make_env("pp6v2")
        rng = np.random.default_rng(19)
        for _ in range(20):
            state = self.setup_state(env, int(rng.integers(1 << 30)))
            state.pos[:8] = rng.uniform(-1.2, 1.2, size=(8, 2))
            got = env.predator_prey_rewards(state)
            pred, prey = range(6), range(6, 8)
            want = np.zeros(8)
            contacts = 0
            for p in pred:
                want[p] -= 0.1 * min(
                    float(np.linalg.norm(state.pos[p] - state.pos[q])) for q in prey
                )
            for q in prey:
                want[q] += 0.1 * min(
                    float(np.linalg.norm(state.pos[p] - state.pos[q])) for p in pred
                )
                for p in pred:
                    if collides(state, p, q):
                        contacts += 1
                        want[q] -= 10.0
                for c in state.pos[q]:
                    x = abs(float(c))
                    if x < 0.9:
                        pass
                    elif x < 1.0:
                        want[q] -= (x - 0.9) * 10.0
                    else:
                        want[q] -= min(float(np.exp(2 * x - 2)), 10.0)
            for p in pred:
                want[p] += 10.0 * contacts
            assert np.allclose(got, want, rtol=0, atol=1e-9)

    def test_boundary_penalty_escalates(self):
        env = make_env("pp3v1")
        state = self.setup_state(env, 20)
        state.pos[:3] = [[-0.5, 0.0], [-0.6, 0.1], [-0.6, -0.1]]
        penalties = []
        for x in (0.5, 0.95, 1.1, 1.4):
            state.pos[3] = [x, 0.0]
            penalties.append(env.predator_prey_rewards(state)[3])
        assert penalties[0] > penalties[1] > penalties[2] > penalties[3]


class TestCollision:
    @settings(max_examples=60, deadline=None)
    @given(
        ax=st.floats(-1, 1), ay=st.floats(-1, 1),
        bx=st.floats(-1, 1), by=st.floats(-1, 1),
    )
    def test_symmetry(self, ax, ay, bx, by):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(21))
        state.pos[0] = [ax, ay]
        state.pos[1] = [bx, by]
        assert collides(state, 0, 1) == collides(state, 1, 0)

    def test_threshold_is_radius_sum(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(22))
        state.pos[0] = [0.0, 0.0]
        state.pos[1] = [0.3, 0.0]   # exactly the radius sum: no contact
        assert not collides(state, 0, 1)
        state.pos[1] = [0.3 - 1e-9, 0.0]
        assert collides(state, 0, 1)


class TestInterfaces:
    def test_global_state_layout(self):
        env = make_env("spread3")
        state, _ = env.reset(np.random.default_rng(23))
        flat = env.global_state(state)
        assert flat.shape == (env.state_dim,)
        assert np.array_equal(flat[:2], state.pos[0])
        assert np.array_equal(flat[2:4], state.vel[0])
        assert np.array_equal(flat[4:6], state.pos[1])

    def test_trajectory_csv(self, tmp_path):
        env = make_env("spread3")
        rng = np.random.default_rng(24)
        states, _ = rollout(env, rng, lambda t: np.zeros((3, 2)))
        path = tmp_path / "traj.csv"
        write_trajectory(path, states)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "step,entity_id,x,y,vx,vy"
        assert len(lines) == 1 + len(states) * env.n_entities
