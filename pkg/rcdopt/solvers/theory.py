"""随机坐标下降的复杂度界

记号：N为块数，L = max_i L_i，R为x0所在水平集在alpha范数下的半径，
gap0 = F(x0) - F*，k为原始迭代次数（每次更新一对块）。
"""
import math

from rcdopt.utils.errors import ConfigError


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ConfigError(f'{name}必须为正：{value}')


def pair_lipschitz(l_i, l_j, alpha):
    """L_ij^alpha = L_i^(1-alpha) + L_j^(1-alpha)"""
    return l_i ** (1.0 - alpha) + l_j ** (1.0 - alpha)


def expected_gap_bound(k, num_blocks, max_lipschitz, alpha, radius, gap0):
    """凸情形下phi^k - F*的上界：c / (k + c / gap0)，c = N^2 * L^(1-alpha) * R^2"""
    _check_positive(num_blocks=num_blocks, max_lipschitz=max_lipschitz)
    if gap0 <= 0:
        return 0.0
    c = num_blocks ** 2 * max_lipschitz ** (1.0 - alpha) * radius ** 2
    if c == 0:
        return 0.0
    return c / (k + c / gap0)


def gamma(sigma, max_lipschitz, alpha):
    """强凸情形的收缩因子gamma

    sigma <= 4 L^(1-alpha)时为1 - sigma / (8 L^(1-alpha))，否则为2 L^(1-alpha) / sigma
    """
    _check_positive(sigma=sigma, max_lipschitz=max_lipschitz)
    scaled = max_lipschitz ** (1.0 - alpha)
    if sigma <= 4.0 * scaled:
        return 1.0 - sigma / (8.0 * scaled)
    return 2.0 * scaled / sigma


def linear_rate(num_blocks, gamma_value):
    """每次迭代期望间隙的收缩率 1 - 2(1 - gamma) / N^2"""
    return 1.0 - 2.0 * (1.0 - gamma_value) / num_blocks ** 2


def strongly_convex_gap_bound(k, num_blocks, gamma_value, gap0):
    return linear_rate(num_blocks, gamma_value) ** k * gap0


def iterations_for_probability(epsilon, rho, num_blocks, max_lipschitz, alpha, radius, gap0):
    """凸情形下保证Pr(phi^K - F* <= epsilon) >= 1 - rho的迭代次数K

    K >= c / epsilon * (1 + log(1 / rho)) + 2 - c / gap0，c = 2 N^2 L^(1-alpha) R^2
    """
    _check_positive(epsilon=epsilon, rho=rho)
    if rho >= 1:
        raise ConfigError(f'rho必须在(0, 1)之间：{rho}')
    if gap0 <= epsilon:
        return 0
    c = 2.0 * num_blocks ** 2 * max_lipschitz ** (1.0 - alpha) * radius ** 2
    return max(int(math.ceil(c / epsilon * (1.0 + math.log(1.0 / rho)) + 2.0 - c / gap0)), 0)


def iterations_for_probability_strong(epsilon, rho, num_blocks, gamma_value, gap0):
    """强凸情形：K >= N^2 / (2(1 - gamma)) * log(gap0 / (epsilon * rho))"""
    _check_positive(epsilon=epsilon, rho=rho)
    if rho >= 1:
        raise ConfigError(f'rho必须在(0, 1)之间：{rho}')
    if gap0 <= epsilon * rho:
        return 0
    return int(math.ceil(num_blocks ** 2 / (2.0 * (1.0 - gamma_value)) * math.log(gap0 / (epsilon * rho))))


def tuple_gap_bound(k, num_blocks, num_constraints, max_lipschitz, radius, gap0):
    """(m+1)块算法的期望间隙上界：c / (k + c / gap0)，c = N^(m+1) * L * R0^2"""
    if gap0 <= 0:
        return 0.0
    c = num_blocks ** (num_constraints + 1) * max_lipschitz * radius ** 2
    if c == 0:
        return 0.0
    return c / (k + c / gap0)
