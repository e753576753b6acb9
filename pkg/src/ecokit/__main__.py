from ecokit.cli import main

raise SystemExit(main())
