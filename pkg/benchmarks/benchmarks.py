# flake8: noqa
import conormal_mhd as cm


def _state(n):
    grid = cm.Grid(cm.GridSpec(nx=n, ny=n))
    return cm.make_initial(
        grid, cm.PhysicalParams(epsilon=1e-2), cm.InitialDataSpec(amplitude=1e-2)
    )


class RhsSuite:
    params = [32, 64, 128]

    def setup(self, n):
        self.state = _state(n)
        self.ideal = self.state.replace(params=self.state.params.with_epsilon(0.0))

    def time_viscous_rhs(self, n):
        cm.viscous_rhs(self.state)

    def time_ideal_rhs(self, n):
        cm.ideal_rhs(self.ideal)


class StepSuite:
    params = [32, 64]

    def setup(self, n):
        self.solver = cm.Solver(_state(n), "viscous")

    def time_rk4_step(self, n):
        self.solver.step(1e-4)


class NormSuite:
    def setup(self):
        s = _state(64)
        self.ring = cm.TimeRing.from_states(
            [s.replace(time=0.01 * k) for k in range(5)]
        )

    def time_energy_Nm(self):
        cm.energy_Nm(self.ring, 2, 2)
