// regenerates fixtures/golden.json from the canonical report cases.
// run after any intentional format change, then review the diff.

#include <iostream>
#include <string>

#include <anderson/verify.hpp>

int main(int argc, char** argv) {
    std::string out = std::string(ANDERSON_SOURCE_DIR) + "/fixtures/golden.json";
    if (argc > 1) out = argv[1];
    anderson::write_text_file(out, anderson::render_golden_file());
    std::cout << "wrote " << out << "\n";
    return 0;
}
