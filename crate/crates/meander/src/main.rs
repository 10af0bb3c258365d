fn main() {
    meander::cli::main()
}
