use instance_gen::{sample_relations_instance, GenOptions};
use instruction_lang::Instruction;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    for seed in [1u64, 2, 3, 4] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let opts = GenOptions::default();
        let n = 1_000_000usize;
        let mut go_to = 0usize;
        for _ in 0..n {
            let inst = sample_relations_instance(&mut rng, &opts);
            if let Instruction::Relation(r) = inst.instruction {
                if r.mentions_agent() {
                    go_to += 1;
                }
            }
        }
        println!("seed {seed}: {}", go_to as f64 / n as f64);
    }
}
