from src.nonholonomic_slip_tool import cli_main


def main():
    cli_main()


if __name__ == "__main__":
    main()
