// Certify a few builtin models and print status, SDP value and the monotone matrix size.
#include <iostream>

#include "heomcp/certify.hpp"

int main() {
    using namespace heomcp;
    for (const auto& m : {jaynes_cummings(10, 1), reviving_2level(0.5, 0.5, 1, 4), reviving_3level(1, 1, 0.5, -0.5),
                          bath(1.2, 0.7, 1, 0.3), spin_boson(1, 3, 2, 0.8)}) {
        auto c = certify_model(m);
        std::cout << m.name << ": " << c.status;
        if (!c.ok()) {
            auto a = certify_after_tp(m);
            std::cout << " / after t_p: " << a.status;
            if (a.extra.contains("t_p")) std::cout << " (t_p = " << a.extra["t_p"] << ")";
        }
        std::cout << "\n";
    }
}
