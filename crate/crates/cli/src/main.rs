fn main() {
    println!("kdv-lab");
}
