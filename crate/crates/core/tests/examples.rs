macro_rules! example {
    ($module:ident, $test:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }

        #[test]
        fn $test() {
            $module::run_example().expect(concat!($file, " should run"));
        }
    };
}

example!(standard_config, standard_config_runs, "standard_config.rs");
example!(multimodal_escape, multimodal_escape_runs, "multimodal_escape.rs");
example!(grid_oracle, grid_oracle_runs, "grid_oracle.rs");
example!(custom_objective, custom_objective_runs, "custom_objective.rs");
example!(external_trainer, external_trainer_runs, "external_trainer.rs");
example!(noisy_objective, noisy_objective_runs, "noisy_objective.rs");
