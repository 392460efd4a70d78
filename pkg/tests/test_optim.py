import numpy as np

from hdmargin.optim import adam_init, adam_step


def test_zero_gradient_keeps_parameters_fixed():
    params = np.array([1.0, -2.0, 3.0])
    state = adam_init(3)
    for _ in range(25):
        params -= adam_step(state, np.zeros(3), lr=0.1)
    assert np.array_equal(params, [1.0, -2.0, 3.0])


def test_first_step_magnitude_is_learning_rate():
    # bias correction makes the first update ~ lr * sign(g) per component
    state = adam_init(2)
    update = adam_step(state, np.array([3.0, -0.25]), lr=0.01)
    assert np.allclose(np.abs(update), 0.01, rtol=1e-6)
    assert np.sign(update[0]) == 1 and np.sign(update[1]) == -1


def test_matches_independent_recurrence():
    # plain-float reimplementation of the moment recurrences as the oracle
    beta1, beta2, eps, lr = 0.9, 0.999, 1e-8, 0.05
    rng = np.random.default_rng(0)
    grads = [rng.standard_normal(4) for _ in range(10)]

    params = np.zeros(4)
    state = adam_init(4)
    for g in grads:
        params -= adam_step(state, g, lr)

    expected = [0.0, 0.0, 0.0, 0.0]
    m = [0.0] * 4
    v = [0.0] * 4
    for t, g in enumerate(grads, start=1):
        for i in range(4):
            m[i] = beta1 * m[i] + (1 - beta1) * g[i]
            v[i] = beta2 * v[i] + (1 - beta2) * g[i] * g[i]
            m_hat = m[i] / (1 - beta1 ** t)
            v_hat = v[i] / (1 - beta2 ** t)
            expected[i] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    assert np.max(np.abs(params - np.array(expected))) <= 1e-12


def test_scalar_state():
    state = adam_init(())
    value = 1.0
    value -= float(adam_step(state, np.asarray(2.0), lr=0.1))
    assert abs(value - 0.9) < 1e-6
