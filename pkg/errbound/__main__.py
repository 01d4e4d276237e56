from errbound.main import main

main()
