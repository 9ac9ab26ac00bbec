"""Entry point for running the crowdnav CLI as a module."""

from .commands import main

if __name__ == '__main__':
    main()
