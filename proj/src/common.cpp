#include "trajinspect/common.hpp"

namespace trajinspect {

std::string_view to_string(Absorbing a) { return a == Absorbing::surv ? "SURV" : "DEATH"; }

std::string_view to_string(CensorMode m) {
    return m == CensorMode::terminal_reward ? "terminal_reward" : "censored";
}

Absorbing parse_absorbing(std::string_view s) {
    if (s == "SURV") return Absorbing::surv;
    if (s == "DEATH") return Absorbing::death;
    throw ValidationError("unknown absorbing state '" + std::string(s) + "'");
}

CensorMode parse_censor_mode(std::string_view s) {
    if (s == "terminal_reward") return CensorMode::terminal_reward;
    if (s == "censored") return CensorMode::censored;
    throw ValidationError("unknown censor mode '" + std::string(s) + "' (expected terminal_reward or censored)");
}

}  // namespace trajinspect
