#include "mms/types.hpp"

#include <stdexcept>

namespace mms {

const char* to_string(Laterality l) {
    return l == Laterality::Left ? "L" : "R";
}

const char* to_string(View v) {
    switch (v) {
        case View::CC: return "CC";
        case View::MLO: return "MLO";
        case View::LM: return "LM";
        case View::ML: return "ML";
        case View::XCCL: return "XCCL";
        case View::XCC: return "XCC";
        case View::TAN: return "TAN";
        case View::XCCM: return "XCCM";
        case View::AT: return "AT";
        case View::RL: return "RL";
        case View::RM: return "RM";
    }
    return "?";
}

const char* to_string(Modality m) {
    switch (m) {
        case Modality::FFDM: return "FFDM";
        case Modality::CVIEW: return "CVIEW";
        case Modality::DBT: return "DBT";
    }
    return "?";
}

Laterality laterality_from_string(const std::string& s) {
    if (s == "L" || s == "Left" || s == "left") return Laterality::Left;
    if (s == "R" || s == "Right" || s == "right") return Laterality::Right;
    throw std::invalid_argument("unknown laterality: " + s);
}

View view_from_string(const std::string& s) {
    for (View v : {View::CC, View::MLO, View::LM, View::ML, View::XCCL, View::XCC,
                   View::TAN, View::XCCM, View::AT, View::RL, View::RM})
        if (s == to_string(v)) return v;
    throw std::invalid_argument("unknown view: " + s);
}

Modality modality_from_string(const std::string& s) {
    if (s == "FFDM") return Modality::FFDM;
    if (s == "CVIEW" || s == "C-View" || s == "CView") return Modality::CVIEW;
    if (s == "DBT") return Modality::DBT;
    throw std::invalid_argument("unknown modality: " + s);
}

}  // namespace mms
