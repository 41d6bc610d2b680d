#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "jfr/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "jfr: joint face hallucination + recognition trainer and evaluation harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string image_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool seed_given = false;
    bool corrupt = false;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        CLI::Option* cfg_opt =
            sub->add_option("--config", config_path, "JSON config file (strict keys)");
        if (config_required) cfg_opt->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed_override, "override the config seed")
            ->each([&](const std::string&) { seed_given = true; });
        sub->add_option("--out", out_override, "override the output directory");
    };

    add_common(app.add_subcommand("gen-data", "generate the synthetic identity dataset"), true);
    add_common(app.add_subcommand("train", "train one model in the configured mode"), true);
    add_common(app.add_subcommand("eval", "evaluate a checkpoint on the configured input"),
               true);
    add_common(app.add_subcommand("settings", "train and evaluate the six-setting comparison"),
               true);

    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference validation of every gradient");
    add_common(gradcheck, false);
    gradcheck->add_flag("--corrupt", corrupt,
                        "damage one analytic gradient to prove the checker can fail");

    CLI::App* hallucinate =
        app.add_subcommand("hallucinate", "run the hallucination stack over one PPM image");
    add_common(hallucinate, true);
    hallucinate->add_option("--image", image_path, "input PPM (P6), dimensions divisible by 4")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    jfr::CliConfig cfg;
    try {
        if (!config_path.empty()) cfg = jfr::load_config_file(config_path);
        if (seed_given) cfg.seed = seed_override;
        if (!out_override.empty()) cfg.out_dir = out_override;
        jfr::stamp_config(cfg);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return jfr::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return jfr::kExitRuntime;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    return jfr::run_command(command, cfg, image_path, corrupt, std::cout, std::cerr);
}
