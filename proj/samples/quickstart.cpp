// Builds the order-3 basis pair, bounds the key rate two ways and runs a short session.
#include <iostream>

#include "pmubqkd/presets.hpp"
#include "pmubqkd/protocol.hpp"

int main() {
    const auto pmub = pmubqkd::build_pmub(3);
    std::cout << "max overlap c = " << pmub.c << ", qMU = " << pmub.qMU << " bits\n";

    const double q = 0.05;
    const auto analytic = pmubqkd::analytic_key_rate(pmub.dimension(), q, pmub.qMU);
    const auto dual = pmubqkd::numerical_key_rate(pmubqkd::ConstraintPreset::Calibrated, q, pmub);
    std::cout << "Q = " << q << ": analytic " << analytic.unclamped << ", dual " << dual.keyRate << " bits\n";

    pmubqkd::ProtocolConfig cfg;
    cfg.order = 3;
    cfg.rounds = 100000;
    cfg.seed = 1;
    cfg.channel = pmubqkd::SymmetricChannel{q};
    const auto session = pmubqkd::run_session(cfg, pmub);
    const auto& st = session.sifted.stats;
    std::cout << "sifted " << st.rawKeyLength << " of " << st.rounds << " rounds, QBER L " << st.qberL << " H "
              << st.qberH << "\n";
}
