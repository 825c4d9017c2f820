#include <string>

#include <benchmark/benchmark.h>

#include "gridrl/dispatch.hpp"
#include "gridrl/network.hpp"
#include "gridrl/power_flow.hpp"
#include "gridrl/scenario.hpp"

namespace {

using namespace gridrl;

NetworkModel fixture(const char* name) {
  return load_network(std::string(GRIDRL_DATA_DIR) + "/networks/" + name + ".json");
}

Scenario midday(const NetworkModel& net) {
  Scenario sc;
  sc.load_scale.assign(net.load_buses().size(), 0.4);
  for (const InverterSpec& inv : net.inverters()) sc.pv_avail.push_back(0.9 * inv.dc_rating);
  return sc;
}

void BM_SolveIeee37(benchmark::State& state) {
  const NetworkModel net = fixture("ieee37");
  const AdmittanceMatrix y = build_admittance(net);
  const Scenario sc = midday(net);
  const InjectionVector inj = build_injections(net, sc, unity_pf_inverters(net, sc));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(net, y, inj));
  }
}
BENCHMARK(BM_SolveIeee37);

void BM_BuildAdmittanceIeee37(benchmark::State& state) {
  const NetworkModel net = fixture("ieee37");
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_admittance(net));
  }
}
BENCHMARK(BM_BuildAdmittanceIeee37);

void BM_DroopEquilibrium(benchmark::State& state) {
  const NetworkModel net = fixture(state.range(0) == 0 ? "thirteen_bus" : "ieee37");
  const AdmittanceMatrix y = build_admittance(net);
  const Scenario sc = midday(net);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_droop_equilibrium(net, y, sc));
  }
}
BENCHMARK(BM_DroopEquilibrium)->Arg(0)->Arg(1);

}  // namespace
